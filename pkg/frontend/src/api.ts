// Thin typed client for the platform API. This is the only place the
// frontend touches the network.

import type {
  Affiliation,
  AggregatesResponse,
  ApiError,
  DeletionReceipt,
  EnrollResponse,
  FilterState,
  LinkResponse,
  StatusResponse,
  SummaryResponse,
  SurveyAnswers,
  SurveyDefinition,
} from "./types.js";

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiRequestError extends Error implements ApiError {
  status: number;
  code: string;

  constructor(status: number, code: string, message: string) {
    super(message);
    this.status = status;
    this.code = code;
  }
}

async function parseError(resp: Response): Promise<ApiRequestError> {
  let code = "unknown";
  let message = resp.statusText;
  try {
    const body = await resp.json();
    if (body && body.error) {
      code = body.error.code ?? code;
      message = body.error.message ?? message;
    }
  } catch {
    // non-JSON error body: keep the status text
  }
  return new ApiRequestError(resp.status, code, message);
}

export class ApiClient {
  constructor(
    readonly baseUrl: string,
    private fetchImpl: FetchLike = (url, init) => fetch(url, init),
  ) {}

  private async request<T>(
    method: string,
    path: string,
    options: { body?: unknown; token?: string } = {},
  ): Promise<T> {
    const headers: Record<string, string> = {};
    if (options.body !== undefined) headers["Content-Type"] = "application/json";
    if (options.token) headers["Authorization"] = `Bearer ${options.token}`;
    const resp = await this.fetchImpl(`${this.baseUrl}${path}`, {
      method,
      headers,
      body: options.body === undefined ? undefined : JSON.stringify(options.body),
    });
    if (!resp.ok) throw await parseError(resp);
    return (await resp.json()) as T;
  }

  listAffiliations(): Promise<{ affiliations: Affiliation[] }> {
    return this.request("GET", "/affiliations");
  }

  enroll(body: {
    display_name: string;
    phone: string;
    affiliation_id?: string;
    affiliation_name?: string;
    region_tag?: string;
    consent: { consented: boolean; consent_version: string };
  }): Promise<EnrollResponse> {
    return this.request("POST", "/drivers", { body });
  }

  link(
    driverId: string,
    token: string,
    body: { account_id?: string; seed?: number; params?: Record<string, unknown> },
  ): Promise<LinkResponse> {
    return this.request("POST", `/drivers/${driverId}/link`, { body, token });
  }

  status(token: string): Promise<StatusResponse> {
    return this.request("GET", "/me/status", { token });
  }

  fetchSurvey(surveyToken: string): Promise<SurveyDefinition> {
    return this.request("GET", `/survey/${surveyToken}`);
  }

  submitSurvey(surveyToken: string, answers: SurveyAnswers): Promise<unknown> {
    return this.request("POST", `/survey/${surveyToken}`, { body: answers });
  }

  summary(token: string): Promise<SummaryResponse> {
    return this.request("GET", "/me/summary", { token });
  }

  requestDeletion(token: string): Promise<DeletionReceipt> {
    return this.request("POST", "/me/delete", { token });
  }

  aggregates(adminKey: string, filter: FilterState): Promise<AggregatesResponse> {
    const params = new URLSearchParams();
    if (filter.affiliation_ids.length) {
      params.set("affiliation_ids", filter.affiliation_ids.join(","));
    }
    if (filter.date_from) params.set("from", `${filter.date_from}T00:00:00Z`);
    if (filter.date_to) params.set("to", `${filter.date_to}T23:59:59Z`);
    if (filter.categories.length) params.set("categories", filter.categories.join(","));
    const query = params.toString();
    return this.request("GET", `/admin/aggregates${query ? "?" + query : ""}`, {
      token: adminKey,
    });
  }

  exportUrl(kind: "ndjson" | "csv"): string {
    return `${this.baseUrl}/admin/export/activities.${kind}`;
  }
}
