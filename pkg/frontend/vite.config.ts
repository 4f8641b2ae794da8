import { defineConfig } from "vitest/config";

// Dev server proxies /api to a locally running `vaecomposer serve`.
export default defineConfig({
  server: {
    proxy: {
      "/api": "http://127.0.0.1:8000",
    },
  },
  build: {
    outDir: "dist",
  },
  test: {
    environment: "node",
    testTimeout: 15000,
    hookTimeout: 120000,
  },
});
