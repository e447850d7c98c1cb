/**
 * Typed client for the inference service. Every POST body is validated
 * against the schemas the service publishes at /api/spec before it is sent,
 * so a request that would be rejected server-side never leaves the client.
 */
import { JsonSchema, validate } from "./jsonSchema.js";

export interface AttributeInfo {
  name: string;
  class_count: number;
}

export interface SchemaResponse {
  attributes: AttributeInfo[];
  image_size: number;
  checkpoint_hash: string;
}

export interface Sample {
  id: number;
  labels: Record<string, number>;
  thumbnail: string; // base64 PNG
}

export interface SamplesResponse {
  total: number;
  samples: Sample[];
}

export interface TransferBody {
  source_id: number;
  donors: Record<string, number>;
  attributes: string[];
}

export interface MixBody {
  attribute: string;
  components: { id: number; weight: number }[];
  base_id?: number | null;
}

export interface InterpolateBody {
  attribute: string;
  id_i: number;
  id_j: number;
  steps: number;
  base_id?: number | null;
}

export interface TransferResponse {
  image: string;
  predicted: Record<string, number[]>;
}

export interface SpecResponse {
  transfer: JsonSchema;
  mix: JsonSchema;
  interpolate: JsonSchema;
}

export class RequestValidationError extends Error {
  constructor(
    public readonly endpoint: string,
    public readonly violations: string[],
  ) {
    super(`invalid ${endpoint} body: ${violations.join("; ")}`);
  }
}

export class ServiceError extends Error {
  constructor(
    public readonly status: number,
    detail: string,
  ) {
    super(detail);
  }
}

type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  private spec: SpecResponse | null = null;

  constructor(
    private readonly baseUrl: string,
    private readonly fetchFn: FetchLike = (u, i) => fetch(u, i),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchFn(`${this.baseUrl}${path}`, init);
    if (!response.ok) {
      let detail = response.statusText;
      try {
        const body = await response.json();
        if (body && typeof body.detail === "string") detail = body.detail;
      } catch {
        /* non-JSON error body */
      }
      throw new ServiceError(response.status, detail);
    }
    return (await response.json()) as T;
  }

  private async post<T>(
    path: string,
    endpoint: keyof SpecResponse,
    body: unknown,
  ): Promise<T> {
    const spec = await this.getSpec();
    const violations = validate(spec[endpoint], body);
    if (violations.length > 0) {
      throw new RequestValidationError(endpoint, violations);
    }
    return this.request<T>(path, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
  }

  async getSpec(): Promise<SpecResponse> {
    if (this.spec === null) {
      this.spec = await this.request<SpecResponse>("/api/spec");
    }
    return this.spec;
  }

  getSchema(): Promise<SchemaResponse> {
    return this.request<SchemaResponse>("/api/schema");
  }

  getSamples(limit = 16, offset = 0): Promise<SamplesResponse> {
    return this.request<SamplesResponse>(
      `/api/samples?limit=${limit}&offset=${offset}`,
    );
  }

  transfer(body: TransferBody): Promise<TransferResponse> {
    return this.post<TransferResponse>("/api/transfer", "transfer", body);
  }

  mix(body: MixBody): Promise<{ image: string }> {
    return this.post<{ image: string }>("/api/mix", "mix", body);
  }

  interpolate(body: InterpolateBody): Promise<{ images: string[] }> {
    return this.post<{ images: string[] }>("/api/interpolate", "interpolate", body);
  }
}
