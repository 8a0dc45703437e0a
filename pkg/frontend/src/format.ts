// Percent formatting to two decimals, matching the service's accuracy tables.

export function formatPercent(fraction: number): string {
  return `${(fraction * 100).toFixed(2)}%`;
}

export function formatChangePercent(fraction: number): string {
  const pct = fraction * 100;
  const sign = pct > 0 ? "+" : "";
  return `${sign}${pct.toFixed(2)}%`;
}

export function formatAccuracy(value: number): string {
  return value.toFixed(4);
}
