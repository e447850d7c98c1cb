/**
 * Minimal JSON-schema checker covering the subset the service publishes at
 * /api/spec: object/array/string/integer/number/null types, required
 * properties, additionalProperties for typed maps, minItems, anyOf, and
 * local $defs/$ref. Returns a list of human-readable violations; an empty
 * list means the value conforms.
 */

export interface JsonSchema {
  type?: string;
  properties?: Record<string, JsonSchema>;
  required?: string[];
  items?: JsonSchema;
  minItems?: number;
  additionalProperties?: JsonSchema;
  anyOf?: JsonSchema[];
  $ref?: string;
  $defs?: Record<string, JsonSchema>;
  [key: string]: unknown;
}

function resolveRef(ref: string, root: JsonSchema): JsonSchema {
  const m = ref.match(/^#\/\$defs\/(.+)$/);
  if (!m || !root.$defs || !(m[1]! in root.$defs)) {
    throw new Error(`unresolvable $ref ${ref}`);
  }
  return root.$defs[m[1]!]!;
}

function typeOf(value: unknown): string {
  if (value === null) return "null";
  if (Array.isArray(value)) return "array";
  if (typeof value === "number") {
    return Number.isInteger(value) ? "integer" : "number";
  }
  return typeof value;
}

function typeMatches(expected: string, value: unknown): boolean {
  const actual = typeOf(value);
  if (expected === "number") return actual === "number" || actual === "integer";
  return actual === expected;
}

export function validate(
  schema: JsonSchema,
  value: unknown,
  root: JsonSchema = schema,
  path = "$",
): string[] {
  if (schema.$ref) {
    return validate(resolveRef(schema.$ref, root), value, root, path);
  }
  if (schema.anyOf) {
    const failures = schema.anyOf.map((s) => validate(s, value, root, path));
    if (failures.some((f) => f.length === 0)) return [];
    return [`${path}: matches none of the ${schema.anyOf.length} alternatives`];
  }
  const errors: string[] = [];
  if (schema.type && !typeMatches(schema.type, value)) {
    return [`${path}: expected ${schema.type}, got ${typeOf(value)}`];
  }
  if (schema.type === "object" && value !== null && typeof value === "object") {
    const obj = value as Record<string, unknown>;
    for (const key of schema.required ?? []) {
      if (!(key in obj)) errors.push(`${path}: missing required property ${key}`);
    }
    for (const [key, sub] of Object.entries(schema.properties ?? {})) {
      if (key in obj) errors.push(...validate(sub, obj[key], root, `${path}.${key}`));
    }
    if (schema.additionalProperties) {
      for (const [key, v] of Object.entries(obj)) {
        if (!(schema.properties && key in schema.properties)) {
          errors.push(
            ...validate(schema.additionalProperties, v, root, `${path}.${key}`),
          );
        }
      }
    }
  }
  if (schema.type === "array" && Array.isArray(value)) {
    if (schema.minItems !== undefined && value.length < schema.minItems) {
      errors.push(`${path}: needs at least ${schema.minItems} items`);
    }
    if (schema.items) {
      value.forEach((v, i) =>
        errors.push(...validate(schema.items!, v, root, `${path}[${i}]`)),
      );
    }
  }
  return errors;
}
