import { defineConfig } from 'vitest/config'

export default defineConfig({
  test: {
    include: ['tests/**/*.test.ts'],
    environment: 'node',
    // the round-trip test drives one long-lived service process; run
    // files sequentially so ports and the plan cache are not contended
    fileParallelism: false,
    hookTimeout: 120_000,
  },
})
