// Labeling client: fetch the pending query, play both segment animations,
// then accept one verdict (Left = first, Right = second, Space = skip).
//
// The harness is the single source of truth; the only client state is the
// currently displayed ticket, and every submission carries exactly that
// ticket's id.

import { ApiClient, Answer, Query, Status } from './api.js'
import { PathRenderer } from './render.js'

export interface AppOptions {
  base?: string
  pollMs?: number
  animationMs?: number
  backoffBaseMs?: number
}

const sleep = (ms: number) => new Promise<void>((r) => setTimeout(r, ms))

export class LabelerApp {
  readonly api: ApiClient
  private pollMs: number
  private animationMs: number
  private backoffBaseMs: number

  private current: Query | null = null
  private inputEnabled = false
  private submitting = false
  private done = false
  private running = false
  private errorStreak = 0

  private progressEl: HTMLElement
  private roundEl: HTMLElement
  private bannerEl: HTMLElement
  private buttons: Record<Answer, HTMLButtonElement>
  private renderers: [PathRenderer, PathRenderer]
  private doc: Document
  private keyHandler: (event: Event) => void

  constructor(doc: Document, options: AppOptions = {}) {
    this.doc = doc
    this.api = new ApiClient(options.base ?? '')
    this.pollMs = options.pollMs ?? 500
    this.animationMs = options.animationMs ?? 1500
    this.backoffBaseMs = options.backoffBaseMs ?? 500

    const byId = (id: string) => {
      const el = doc.getElementById(id)
      if (!el) throw new Error(`missing element #${id}`)
      return el
    }
    this.progressEl = byId('progress')
    this.roundEl = byId('round')
    this.bannerEl = byId('banner')
    this.buttons = {
      first: byId('btn-first') as HTMLButtonElement,
      second: byId('btn-second') as HTMLButtonElement,
      skip: byId('btn-skip') as HTMLButtonElement,
    }
    this.renderers = [
      new PathRenderer(byId('canvas0') as HTMLCanvasElement),
      new PathRenderer(byId('canvas1') as HTMLCanvasElement),
    ]

    this.buttons.first.addEventListener('click', () => void this.submit('first'))
    this.buttons.second.addEventListener('click', () => void this.submit('second'))
    this.buttons.skip.addEventListener('click', () => void this.submit('skip'))
    this.keyHandler = (event) => this.onKey(event as KeyboardEvent)
    doc.addEventListener('keydown', this.keyHandler)
    this.setButtonsEnabled(false)
  }

  currentTicketId(): string | null {
    return this.current ? this.current.ticket_id : null
  }

  isDone(): boolean {
    return this.done
  }

  canSubmit(): boolean {
    return (
      this.running &&
      this.inputEnabled &&
      !this.submitting &&
      this.current !== null &&
      !this.done
    )
  }

  start(): void {
    if (this.running) return
    this.running = true
    void this.loop()
  }

  stop(): void {
    this.running = false
    this.doc.removeEventListener('keydown', this.keyHandler)
  }

  private onKey(event: KeyboardEvent): void {
    const mapping: Record<string, Answer> = {
      ArrowLeft: 'first',
      ArrowRight: 'second',
      ' ': 'skip',
    }
    const answer = mapping[event.key]
    if (!answer) return
    event.preventDefault()
    void this.submit(answer)
  }

  private async loop(): Promise<void> {
    while (this.running && !this.done) {
      try {
        const status = await this.api.getStatus()
        this.renderStatus(status)
        if (status.labels_done >= status.labels_needed) {
          this.finish(status)
          return
        }
        if (!this.current && !this.submitting) {
          const query = await this.api.getQuery()
          if (query) {
            await this.show(query)
          } else {
            this.setBanner('waiting for the next round…', 'waiting')
          }
        }
        this.errorStreak = 0
        await sleep(this.pollMs)
      } catch {
        this.errorStreak += 1
        const pause = this.backoffBaseMs * Math.min(2 ** (this.errorStreak - 1), 16)
        this.setBanner(`connection lost, retrying in ${Math.round(pause / 1000 * 10) / 10}s…`, 'error')
        await sleep(pause)
      }
    }
  }

  private async show(query: Query): Promise<void> {
    this.current = query
    this.inputEnabled = false
    this.setButtonsEnabled(false)
    this.setBanner('watch both segments…', 'playing')
    await Promise.all([
      this.renderers[0].animate(query.seg0, this.animationMs),
      this.renderers[1].animate(query.seg1, this.animationMs),
    ])
    // judge only after both animations have played once
    if (this.current === query && !this.done) {
      this.inputEnabled = true
      this.setButtonsEnabled(true)
      this.setBanner('which segment performs better?', 'ready')
    }
  }

  async submit(answer: Answer): Promise<void> {
    if (!this.canSubmit() || !this.current) return
    const ticketId = this.current.ticket_id
    this.submitting = true
    this.setButtonsEnabled(false)
    try {
      const outcome = await this.api.postLabel(ticketId, answer)
      if (outcome === 'ok') {
        this.current = null
        this.setBanner('label recorded', 'ok')
      } else if (outcome === 'conflict' || outcome === 'unknown') {
        // someone already settled this ticket: refetch instead of advancing
        this.current = null
        this.setBanner('query was already labeled, refreshing…', 'conflict')
        const query = await this.api.getQuery()
        if (query) await this.show(query)
      } else {
        this.inputEnabled = true
        this.setButtonsEnabled(true)
        this.setBanner('submit failed, try again', 'error')
      }
    } catch {
      this.inputEnabled = true
      this.setButtonsEnabled(true)
      this.setBanner('connection lost, try again', 'error')
    } finally {
      this.submitting = false
    }
  }

  private renderStatus(status: Status): void {
    this.progressEl.textContent = `${status.labels_done} / ${status.labels_needed}`
    this.roundEl.textContent = `round ${status.round}`
  }

  private finish(status: Status): void {
    this.done = true
    this.current = null
    this.inputEnabled = false
    this.setButtonsEnabled(false)
    this.renderStatus(status)
    this.setBanner('session complete, thanks!', 'done')
  }

  private setButtonsEnabled(enabled: boolean): void {
    for (const button of Object.values(this.buttons)) button.disabled = !enabled
  }

  private setBanner(text: string, kind: string): void {
    this.bannerEl.textContent = text
    this.bannerEl.setAttribute('data-state', kind)
  }
}
