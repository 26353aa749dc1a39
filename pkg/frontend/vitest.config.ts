import { defineConfig } from 'vitest/config'

export default defineConfig({
  test: {
    include: ['tests/**/*.test.ts'],
    hookTimeout: 60_000,
    testTimeout: 120_000,
    // the roundtrip suite spawns one python service; keep files sequential
    fileParallelism: false,
  },
})
