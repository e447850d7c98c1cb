import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    globals: true,
    environment: "happy-dom",
    include: ["tests/**/*.test.ts"],
    exclude: process.env.SERVICE_URL ? [] : ["tests/integration.test.ts"],
  },
});
