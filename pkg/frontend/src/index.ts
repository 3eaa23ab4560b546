export { ClientSession, GatewayError, SessionStateError, TransportError } from './client.js';
export type { ClientOptions } from './client.js';
export {
  callRecordSchema,
  episodeResultSchema,
  exchangeSchema,
  observationSchema,
  resetResponseSchema,
  stepResponseSchema,
  wireMessageSchema,
} from './types.js';
export type {
  CallRecord,
  EpisodeResult,
  Exchange,
  Observation,
  ResetResponse,
  StepResponse,
  Task,
  WireMessage,
} from './types.js';
