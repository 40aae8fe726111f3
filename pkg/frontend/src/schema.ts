import { z } from "zod";

/** Versioned wire schemas mirroring the service's published JSON shapes.
 *  All views render exclusively from data validated here. */

export const CommunitySchema = z
  .object({
    id: z.string(),
    kind: z.enum(["density_cluster", "outlier_side"]),
    size: z.number().int().nonnegative(),
    medoid: z.string(),
    side_label: z.string().nullable(),
    members: z.array(z.string()),
    representatives: z.array(z.string()),
  })
  .strict();

export const ResponseSchema = z
  .object({
    text: z.string(),
    community_id: z.string(),
    seed: z.number().int().nullable(),
    prompt_fingerprint: z.string(),
    ordinal: z.number().int().nonnegative(),
    degraded: z.boolean(),
  })
  .strict();

export const ProvenanceSchema = z
  .object({
    similar_post_ids: z.array(z.string()),
    news_snippet_ids: z.array(z.string()),
    kg_chunk_ids: z.array(z.string()),
  })
  .strict();

export const QuotaEntrySchema = z
  .object({
    community_id: z.string(),
    m_k: z.number().int().nonnegative(),
  })
  .strict();

export const RequestEchoSchema = z
  .object({
    post_text: z.string(),
    m_total: z.number().int().positive(),
    topic_hint: z.string().nullable(),
    as_of: z.number().nullable(),
  })
  .strict();

export const ForecastReportSchema = z
  .object({
    schema_version: z.literal(1),
    request: RequestEchoSchema,
    status: z.string(),
    communities: z.array(CommunitySchema),
    responses: z.array(ResponseSchema),
    provenance: ProvenanceSchema,
    quota: z.array(QuotaEntrySchema),
    degraded_flags: z.array(z.string()),
    elapsed_seconds: z.number(),
  })
  .strict();

export const JobSchema = z
  .object({
    job_id: z.string(),
    kind: z.string(),
    status: z.enum(["queued", "running", "done", "failed"]),
    created_at: z.number(),
    updated_at: z.number(),
    result_ref: z.string().nullable(),
    error: z.string().nullable(),
  })
  .strict();

export const JobAcceptedSchema = z
  .object({
    job_id: z.string(),
    status: z.string(),
  })
  .strict();

export const EvalReportSchema = z
  .object({
    emotion_jsd: z.number().nullable(),
    discrimination_mean: z.number().nullable(),
    discrimination_failures: z.number().int().nonnegative(),
    cluster_matching_pct: z.number().nullable(),
    cluster_matching_upper_bound_pct: z.number().nullable(),
    cluster_coverage_pct: z.number().nullable(),
  })
  .strict();

export const HealthSchema = z
  .object({
    status: z.string(),
    posts: z.number().int(),
    dense_docs: z.number().int(),
    news_docs: z.number().int(),
    kg_docs: z.number().int(),
    jobs: z.number().int(),
  })
  .strict();

export type Community = z.infer<typeof CommunitySchema>;
export type PredictedResponse = z.infer<typeof ResponseSchema>;
export type ForecastReport = z.infer<typeof ForecastReportSchema>;
export type Job = z.infer<typeof JobSchema>;
export type JobAccepted = z.infer<typeof JobAcceptedSchema>;
export type EvalReport = z.infer<typeof EvalReportSchema>;
export type Health = z.infer<typeof HealthSchema>;
