// Organizer dashboard state: affiliation/date/category filters feeding
// the aggregate endpoint. Concurrent fetches are deduplicated per
// filter state, and the displayed digest is always the digest of the
// last response that was committed (stale responses never mix in).

import type { ApiClient } from "./api.js";
import type { AggregatesResponse, Comparison, FilterState } from "./types.js";

export const EMPTY_FILTER: FilterState = {
  affiliation_ids: [],
  date_from: null,
  date_to: null,
  categories: [],
};

export function filterKey(filter: FilterState): string {
  return JSON.stringify({
    a: [...filter.affiliation_ids].sort(),
    f: filter.date_from,
    t: filter.date_to,
    c: [...filter.categories].sort(),
  });
}

export class Dashboard {
  filter: FilterState = { ...EMPTY_FILTER };
  data: AggregatesResponse | null = null;
  displayedDigest: string | null = null;
  loading = false;
  lastError: string | null = null;

  private inflight = new Map<string, Promise<AggregatesResponse>>();
  private sequence = 0;

  constructor(private api: ApiClient, private adminKey: string) {}

  async load(filter?: Partial<FilterState>): Promise<AggregatesResponse> {
    if (filter) this.filter = { ...this.filter, ...filter };
    const key = filterKey(this.filter);
    const ticket = ++this.sequence;

    let promise = this.inflight.get(key);
    if (!promise) {
      promise = this.api.aggregates(this.adminKey, this.filter).finally(() => {
        this.inflight.delete(key);
      });
      this.inflight.set(key, promise);
    }
    this.loading = true;
    try {
      const resp = await promise;
      // only the most recent request may commit what is displayed
      if (ticket === this.sequence) {
        this.data = resp;
        this.displayedDigest = resp.digest;
        this.lastError = null;
        this.loading = false;
      }
      return resp;
    } catch (err) {
      if (ticket === this.sequence) {
        this.loading = false;
        this.lastError = err instanceof Error ? err.message : String(err);
      }
      throw err;
    }
  }

  /** Significance badge text, driven solely by the API's verdict. */
  badge(comparison: Comparison): string | null {
    return comparison.significant_at_05 ? "significant (p < 0.05)" : null;
  }

  csvDownloadUrl(): string {
    return this.api.exportUrl("csv");
  }

  ndjsonDownloadUrl(): string {
    return this.api.exportUrl("ndjson");
  }
}
