// Typed client for the labeling service JSON API.

export interface Status {
  round: number
  labels_done: number
  labels_needed: number
  experiment_id: string
}

export interface GoalMarker {
  x: number
  y: number
  radius: number
}

export interface SegmentPath {
  points: [number, number][]
  start: [number, number]
  goal: GoalMarker
}

export interface Query {
  ticket_id: string
  seg0: SegmentPath
  seg1: SegmentPath
}

export type Answer = 'first' | 'second' | 'skip'

export type LabelOutcome = 'ok' | 'conflict' | 'unknown' | 'error'

export class ApiClient {
  constructor(private base: string = '') {}

  async getStatus(): Promise<Status> {
    const resp = await fetch(`${this.base}/api/status`)
    if (!resp.ok) throw new Error(`status endpoint returned ${resp.status}`)
    return (await resp.json()) as Status
  }

  /** The pending query, or null while the harness is between rounds (204). */
  async getQuery(): Promise<Query | null> {
    const resp = await fetch(`${this.base}/api/query`)
    if (resp.status === 204) return null
    if (!resp.ok) throw new Error(`query endpoint returned ${resp.status}`)
    return (await resp.json()) as Query
  }

  async postLabel(ticketId: string, answer: Answer): Promise<LabelOutcome> {
    const resp = await fetch(`${this.base}/api/label`, {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify({ ticket_id: ticketId, answer }),
    })
    if (resp.ok) return 'ok'
    if (resp.status === 409) return 'conflict'
    if (resp.status === 404) return 'unknown'
    return 'error'
  }

  async getHistory(): Promise<{ seg0: string; seg1: string; label: string; round: number }[]> {
    const resp = await fetch(`${this.base}/api/history`)
    if (!resp.ok) throw new Error(`history endpoint returned ${resp.status}`)
    return await resp.json()
  }
}
