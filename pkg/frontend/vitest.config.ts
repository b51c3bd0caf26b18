import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    include: ["tests/**/*.test.ts"],
    environment: "node",
    testTimeout: 300000,
    hookTimeout: 120000,
    // the python server binds one port; keep integration files serialized
    fileParallelism: false,
  },
});
