import { describe, expect, it } from "vitest";

import { classifyInput, inContextWindow } from "../../src/cells.js";

describe("input classification", () => {
  it("classifies the empty string as empty", () => {
    expect(classifyInput("")).toEqual({ kind: "empty" });
  });

  it.each(["42", "-7", "+0.5", "3.14", ".5", "10.", "1e-3", "2E+10", "0"])(
    "classifies %s as a number",
    (text) => {
      expect(classifyInput(text)).toEqual({ kind: "num", value: text });
    },
  );

  it.each([
    "abc",
    " 42",
    "42 ",
    "1,000",
    "10.5.3",
    "Infinity",
    "NaN",
    "0x1f",
    "=SUM(A1:A2)",
    "  ",
  ])("classifies %j as a string", (text) => {
    expect(classifyInput(text)).toEqual({ kind: "str", value: text });
  });

  it("never rewrites the literal", () => {
    for (const text of ["007", "1.50", "+1", "hello  world"]) {
      const result = classifyInput(text);
      expect(result.kind === "empty" ? "" : result.value).toBe(text);
    }
  });
});

describe("context window membership", () => {
  const target = { row: 10, col: 10 };

  it("includes the target itself and the window edge", () => {
    expect(inContextWindow(target, target, 2)).toBe(true);
    expect(inContextWindow(target, { row: 8, col: 12 }, 2)).toBe(true);
    expect(inContextWindow(target, { row: 12, col: 8 }, 2)).toBe(true);
  });

  it("excludes cells just past the edge in either axis", () => {
    expect(inContextWindow(target, { row: 7, col: 10 }, 2)).toBe(false);
    expect(inContextWindow(target, { row: 10, col: 13 }, 2)).toBe(false);
    expect(inContextWindow(target, { row: 13, col: 13 }, 2)).toBe(false);
  });

  it("covers a (2*radius+1)-by-(2*radius+1) square", () => {
    let inside = 0;
    for (let row = 1; row <= 30; row++) {
      for (let col = 1; col <= 30; col++) {
        if (inContextWindow(target, { row, col }, 4)) inside++;
      }
    }
    expect(inside).toBe(9 * 9);
  });
});
