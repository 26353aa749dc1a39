// @vitest-environment happy-dom
import { afterEach, beforeEach, describe, expect, it } from 'vitest'

import { LabelerApp } from '../src/app.js'
import { FakeService, makeQuery, waitFor } from './helpers.js'

const SHELL = `
  <div id="round"></div><div id="progress"></div><div id="banner"></div>
  <canvas id="canvas0"></canvas><canvas id="canvas1"></canvas>
  <button id="btn-first"></button><button id="btn-second"></button><button id="btn-skip"></button>
`

function pressKey(key: string): void {
  document.dispatchEvent(new KeyboardEvent('keydown', { key, bubbles: true }))
}

describe('LabelerApp', () => {
  let service: FakeService
  let app: LabelerApp

  beforeEach(() => {
    document.body.innerHTML = SHELL
    service = new FakeService()
    service.install()
    app = new LabelerApp(document, { pollMs: 5, animationMs: 0, backoffBaseMs: 5 })
  })

  afterEach(() => {
    app.stop()
  })

  it('shows a waiting banner while no query is pending', async () => {
    app.start()
    await waitFor(() => document.getElementById('banner')!.textContent!.includes('waiting'))
    expect(app.canSubmit()).toBe(false)
  })

  it('maps keys to answers and submits the displayed ticket', async () => {
    service.queue.push(makeQuery('t0-0'), makeQuery('t0-1'), makeQuery('t0-2'))
    app.start()
    await waitFor(() => app.canSubmit())
    expect(app.currentTicketId()).toBe('t0-0')

    pressKey('ArrowLeft')
    await waitFor(() => service.posts.length === 1)
    expect(service.posts[0]).toEqual({ ticket_id: 't0-0', answer: 'first' })

    await waitFor(() => app.canSubmit() && app.currentTicketId() === 't0-1')
    pressKey(' ')
    await waitFor(() => service.posts.length === 2)
    expect(service.posts[1]).toEqual({ ticket_id: 't0-1', answer: 'skip' })

    await waitFor(() => app.canSubmit() && app.currentTicketId() === 't0-2')
    pressKey('ArrowRight')
    await waitFor(() => service.posts.length === 3)
    expect(service.posts[2]).toEqual({ ticket_id: 't0-2', answer: 'second' })
  })

  it('ignores keys while animations are still playing', async () => {
    app.stop()
    document.body.innerHTML = SHELL
    app = new LabelerApp(document, { pollMs: 5, animationMs: 120, backoffBaseMs: 5 })
    service.queue.push(makeQuery('t0-0'))
    app.start()
    await waitFor(() => app.currentTicketId() === 't0-0')
    expect(app.canSubmit()).toBe(false)
    pressKey('ArrowLeft')
    await new Promise((r) => setTimeout(r, 30))
    expect(service.posts.length).toBe(0)
    await waitFor(() => app.canSubmit())
    pressKey('ArrowLeft')
    await waitFor(() => service.posts.length === 1)
  })

  it('recovers from a conflict by refetching the pending query', async () => {
    service.queue.push(makeQuery('t0-0'), makeQuery('t0-1'))
    app.start()
    await waitFor(() => app.canSubmit())
    // another session settles the ticket behind our back
    service.resolved.add('t0-0')
    service.queue.shift()
    service.labelsDone += 1
    pressKey('ArrowLeft')
    await waitFor(() => app.canSubmit() && app.currentTicketId() === 't0-1')
    const conflicted = service.posts.filter((p) => p.ticket_id === 't0-0')
    expect(conflicted.length).toBe(1)
  })

  it('keeps the ticket and re-enables input on a server error', async () => {
    service.queue.push(makeQuery('t0-0'))
    app.start()
    await waitFor(() => app.canSubmit())
    service.failNextLabel = true
    pressKey('ArrowLeft')
    await waitFor(() => document.getElementById('banner')!.getAttribute('data-state') === 'error')
    expect(app.currentTicketId()).toBe('t0-0')
    await waitFor(() => app.canSubmit())
    pressKey(' ')
    await waitFor(() => service.posts.filter((p) => p.answer === 'skip').length === 1)
  })

  it('disables everything when the session completes', async () => {
    service.queue.push(makeQuery('t0-0'))
    service.labelsNeeded = 1
    app.start()
    await waitFor(() => app.canSubmit())
    pressKey(' ')
    await waitFor(() => app.isDone())
    expect(document.getElementById('progress')!.textContent).toBe('1 / 1')
    expect((document.getElementById('btn-skip') as HTMLButtonElement).disabled).toBe(true)
    pressKey('ArrowLeft')
    await new Promise((r) => setTimeout(r, 30))
    expect(service.posts.length).toBe(1)
  })
})
