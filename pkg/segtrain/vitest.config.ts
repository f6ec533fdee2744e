import { defineConfig } from 'vitest/config';

export default defineConfig({
  test: {
    include: process.env.RUN_SLOW
      ? ['test/**/*.test.ts', 'test/slow/**/*.slowtest.ts']
      : ['test/**/*.test.ts'],
    testTimeout: 300_000,
    hookTimeout: 300_000,
    // tfjs keeps global state (backend registry); one worker keeps runs stable
    pool: 'threads',
    poolOptions: { threads: { singleThread: true } },
  },
});
