// Shared test utilities: a minimal .pts reader for verifying exports.

export function parsePts(text: string): [number, number][] {
  const lines = text
    .split(/\r?\n/)
    .map((l) => l.trim())
    .filter((l) => l.length > 0);
  if (!/^version\s*:\s*1$/.test(lines[0])) throw new Error(`bad header: ${lines[0]}`);
  const m = /^n_points\s*:\s*(\d+)$/.exec(lines[1]);
  if (!m) throw new Error(`bad n_points: ${lines[1]}`);
  const n = Number(m[1]);
  if (lines[2] !== "{") throw new Error("missing opening brace");
  const points: [number, number][] = [];
  for (let i = 0; i < n; i++) {
    const tokens = lines[3 + i].split(/\s+/);
    if (tokens.length !== 2) throw new Error(`bad point row: ${lines[3 + i]}`);
    points.push([Number(tokens[0]), Number(tokens[1])]);
  }
  if (lines[3 + n] !== "}") throw new Error("missing closing brace");
  return points;
}
