import { defineConfig } from "vitest/config";

export default defineConfig({
  // built bundle is served by the session service at /, next to the API routes
  base: "./",
  build: { outDir: "dist", sourcemap: true },
  server: {
    proxy: {
      "/assets": "http://127.0.0.1:8000",
      "/sessions": { target: "http://127.0.0.1:8000", ws: true },
    },
  },
  test: {
    environment: "node",
    include: ["tests/**/*.test.ts"],
    testTimeout: 300_000,
    hookTimeout: 120_000,
  },
});
