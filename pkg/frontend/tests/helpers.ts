import type { Query } from '../src/api.js'

export async function waitFor(
  predicate: () => boolean,
  timeoutMs = 30_000,
  stepMs = 20,
): Promise<void> {
  const deadline = Date.now() + timeoutMs
  while (Date.now() < deadline) {
    if (predicate()) return
    await new Promise((r) => setTimeout(r, stepMs))
  }
  throw new Error('condition not met in time')
}

export function makeQuery(ticketId: string): Query {
  const path = (shift: number) => ({
    points: [
      [0.1 + shift, 0.1],
      [0.3 + shift, 0.4],
      [0.5 + shift, 0.6],
    ] as [number, number][],
    start: [0.1 + shift, 0.1] as [number, number],
    goal: { x: 0.8, y: 0.8, radius: 0.05 },
  })
  return { ticket_id: ticketId, seg0: path(0), seg1: path(0.05) }
}

/** In-memory stand-in for the labeling service, driving global fetch. */
export class FakeService {
  labelsNeeded = 4
  labelsDone = 0
  round = 0
  queue: Query[] = []
  posts: { ticket_id: string; answer: string }[] = []
  resolved = new Set<string>()
  failNextLabel = false

  install(): void {
    ;(globalThis as any).fetch = (url: string, init?: RequestInit) =>
      Promise.resolve(this.handle(String(url), init))
  }

  private json(status: number, payload: unknown): Response {
    return new Response(JSON.stringify(payload), {
      status,
      headers: { 'Content-Type': 'application/json' },
    })
  }

  handle(url: string, init?: RequestInit): Response {
    if (url.endsWith('/api/status')) {
      return this.json(200, {
        round: this.round,
        labels_done: this.labelsDone,
        labels_needed: this.labelsNeeded,
        experiment_id: 'fake',
      })
    }
    if (url.endsWith('/api/query')) {
      if (!this.queue.length) return new Response(null, { status: 204 })
      return this.json(200, this.queue[0])
    }
    if (url.endsWith('/api/label')) {
      if (this.failNextLabel) {
        this.failNextLabel = false
        return this.json(500, { error: 'boom' })
      }
      const body = JSON.parse(String(init?.body ?? '{}'))
      this.posts.push(body)
      if (this.resolved.has(body.ticket_id)) {
        return this.json(409, { error: 'ticket closed' })
      }
      const head = this.queue[0]
      if (!head || head.ticket_id !== body.ticket_id) {
        return this.json(404, { error: 'unknown ticket' })
      }
      this.resolved.add(body.ticket_id)
      this.queue.shift()
      this.labelsDone += 1
      return this.json(200, { ticket_id: body.ticket_id, label: body.answer, round: 0 })
    }
    return this.json(404, { error: 'not found' })
  }
}
