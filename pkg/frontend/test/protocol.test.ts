import { describe, expect, it } from "vitest";
import { parseServerMessage, ProtocolError, switchCommand } from "../src/protocol.js";

describe("protocol parsing", () => {
  it("accepts known message types", () => {
    const msg = parseServerMessage('{"v":1,"type":"pong"}');
    expect(msg.type).toBe("pong");
  });

  it("rejects non-JSON", () => {
    expect(() => parseServerMessage("nope")).toThrow(ProtocolError);
  });

  it("rejects unknown types and versions", () => {
    expect(() => parseServerMessage('{"v":1,"type":"mystery"}')).toThrow(ProtocolError);
    expect(() => parseServerMessage('{"v":2,"type":"frame"}')).toThrow(ProtocolError);
    expect(() => parseServerMessage("3")).toThrow(ProtocolError);
  });

  it("builds versioned switch commands", () => {
    expect(JSON.parse(switchCommand([1, 2, 3]))).toEqual(
      { v: 1, type: "switch", bins: [1, 2, 3] });
  });
});
