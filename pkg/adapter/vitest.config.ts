import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    include: ["test/**/*.test.ts"],
    testTimeout: 120_000,
    hookTimeout: 30_000,
    // Serve processes are driven sequentially within each file.
    fileParallelism: true,
  },
});
