// Display formatting only. No arithmetic on monetary or statistical
// values happens anywhere in the frontend beyond rendering them.

export function fmtPct(value: number | null | undefined): string {
  if (value === null || value === undefined) return "–";
  return `${value.toFixed(2)}%`;
}

export function fmtUsd(value: string | null | undefined): string {
  if (value === null || value === undefined) return "–";
  return `$${value}`;
}

export function fmtCount(value: number | null | undefined): string {
  if (value === null || value === undefined) return "–";
  return value.toLocaleString("en-US");
}

export function fmtP(p: number | null): string {
  if (p === null) return "no p-value";
  return `p = ${p.toPrecision(3)}`;
}

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;")
    .replace(/'/g, "&#39;");
}
