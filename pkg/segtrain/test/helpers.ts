import { execFileSync } from 'child_process';
import * as fs from 'fs';
import * as path from 'path';

/** Generate a phantom case via the measurement engine's CLI. */
export function makePhantomCase(
  dir: string,
  opts: { seed: number; nTeeth?: number; mix?: string; age?: number; nImages?: number },
): string {
  fs.mkdirSync(dir, { recursive: true });
  execFileSync('rblkit', [
    'phantom',
    '--out', dir,
    '--seed', String(opts.seed),
    '--n-teeth', String(opts.nTeeth ?? 4),
    '--age', String(opts.age ?? 45),
    ...(opts.mix ? ['--mix', opts.mix] : []),
    ...(opts.nImages ? ['--n-images', String(opts.nImages)] : []),
    '--case-id', `seg-fixture-${opts.seed}`,
  ], { stdio: 'pipe' });
  return path.join(dir, 'case.json');
}

export function rblkitAvailable(): boolean {
  try {
    execFileSync('rblkit', ['--help'], { stdio: 'pipe' });
    return true;
  } catch {
    return false;
  }
}
