import { z } from 'zod';

/** Task document accepted inline by /env/reset. */
export interface Task {
  id: string;
  prompt: string;
  reference_answer: string;
  verifier: 'exact_match' | 'numeric_match' | 'contains';
  difficulty: { pass_rate: number; tier: 'easy' | 'medium' | 'hard' };
}

/** One chat-style wire message (assistant decision or tool result). */
export const wireMessageSchema = z
  .object({ role: z.string() })
  .catchall(z.unknown());
export type WireMessage = z.infer<typeof wireMessageSchema>;

export const observationSchema = z.object({
  task_prompt: z.string(),
  catalog_text: z.string(),
  models: z.array(z.string()),
  transcript: z.array(wireMessageSchema),
  remaining_turns: z.number().int(),
});
export type Observation = z.infer<typeof observationSchema>;

export const resetResponseSchema = z.object({
  episode_id: z.string(),
  observation: observationSchema,
});
export type ResetResponse = z.infer<typeof resetResponseSchema>;

export const callRecordSchema = z.object({
  call_id: z.string(),
  episode_id: z.string(),
  turn_index: z.number().int(),
  model_name: z.string(),
  request_digest: z.string(),
  usage: z.object({
    prompt_tokens: z.number().int(),
    completion_tokens: z.number().int(),
  }),
  cost: z.object({ nano_usd: z.number().int(), usd: z.string() }),
  latency_ms: z.number().int(),
  cached: z.boolean(),
  outcome: z.enum(['ok', 'timeout', 'provider_error']),
  retry_count: z.number().int(),
});
export type CallRecord = z.infer<typeof callRecordSchema>;

export const episodeResultSchema = z.object({
  episode_id: z.string(),
  task_id: z.string(),
  status: z.enum(['done_direct', 'done_synthesized', 'done_selected', 'failed']),
  failure_reason: z.string().nullable(),
  final_answer: z.string().nullable(),
  success: z.boolean(),
  provider_cost_nano_usd: z.number().int(),
  router_cost_nano_usd: z.number().int(),
  cost_nano_usd: z.number().int(),
  cost_usd: z.string(),
  normalized_cost: z.number(),
  reward: z.number(),
  records: z.array(callRecordSchema),
});
export type EpisodeResult = z.infer<typeof episodeResultSchema>;

export const stepResponseSchema = z.union([
  z.object({
    observation: observationSchema,
    reward: z.number(),
    done: z.literal(false),
    info: z.object({ cost_nano_usd: z.number().int(), cost_usd: z.string() }),
  }),
  z.object({
    final: episodeResultSchema,
    reward: z.number(),
    done: z.literal(true),
    info: z.object({
      cost_nano_usd: z.number().int(),
      cost_usd: z.string(),
      records: z.array(callRecordSchema),
    }),
  }),
]);
export type StepResponse = z.infer<typeof stepResponseSchema>;

/** One logged exchange: the request sent and the body that came back. */
export const exchangeSchema = z.object({
  kind: z.enum(['reset', 'step']),
  request: z.record(z.string(), z.unknown()),
  response: z.union([resetResponseSchema, stepResponseSchema]),
});
export type Exchange = z.infer<typeof exchangeSchema>;

export const gatewayErrorSchema = z.object({
  error: z.object({ code: z.string(), message: z.string() }),
});
