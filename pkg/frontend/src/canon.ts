/**
 * Canonical JSON writer for grid documents: alphabetically sorted keys,
 * one-space indentation, ASCII-escaped strings, trailing newline.  Equal
 * documents serialize to equal bytes, so an exported grid can be compared
 * verbatim against one written by the service-side tooling.
 */

export type JsonValue =
  | null
  | boolean
  | number
  | string
  | JsonValue[]
  | { [key: string]: JsonValue };

const SHORT_ESCAPES: Record<string, string> = {
  '"': '\\"',
  "\\": "\\\\",
  "\b": "\\b",
  "\f": "\\f",
  "\n": "\\n",
  "\r": "\\r",
  "\t": "\\t",
};

function escapeString(text: string): string {
  let out = '"';
  for (let i = 0; i < text.length; i++) {
    const ch = text[i];
    const code = text.charCodeAt(i);
    if (ch in SHORT_ESCAPES) {
      out += SHORT_ESCAPES[ch];
    } else if (code < 0x20 || code > 0x7e) {
      out += "\\u" + code.toString(16).padStart(4, "0");
    } else {
      out += ch;
    }
  }
  return out + '"';
}

function writeValue(value: JsonValue, level: number): string {
  if (value === null) return "null";
  if (typeof value === "boolean") return value ? "true" : "false";
  if (typeof value === "number") {
    if (!Number.isFinite(value)) throw new TypeError("cannot serialize non-finite number");
    return String(value);
  }
  if (typeof value === "string") return escapeString(value);
  const pad = " ".repeat(level + 1);
  if (Array.isArray(value)) {
    if (value.length === 0) return "[]";
    const items = value.map((item) => pad + writeValue(item, level + 1));
    return "[\n" + items.join(",\n") + "\n" + " ".repeat(level) + "]";
  }
  const keys = Object.keys(value).sort();
  if (keys.length === 0) return "{}";
  const items = keys.map(
    (key) => pad + escapeString(key) + ": " + writeValue(value[key], level + 1),
  );
  return "{\n" + items.join(",\n") + "\n" + " ".repeat(level) + "}";
}

export function canonicalJson(value: JsonValue): string {
  return writeValue(value, 0) + "\n";
}
