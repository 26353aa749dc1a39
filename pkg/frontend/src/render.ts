// Canvas rendering of a segment as a 2-D path with start/goal markers and
// a time-animated progress dot.

import type { SegmentPath } from './api.js'

const PATH_COLOR = '#4f8df7'
const TRAIL_COLOR = '#b8d0fb'
const START_COLOR = '#2e7d32'
const GOAL_COLOR = '#c62828'
const DOT_COLOR = '#0b3d91'

export class PathRenderer {
  private ctx: CanvasRenderingContext2D | null

  constructor(private canvas: HTMLCanvasElement) {
    // happy-dom has no 2-D context; rendering then degrades to a no-op so
    // the control flow stays testable
    this.ctx = canvas.getContext ? canvas.getContext('2d') : null
  }

  private toPx(p: [number, number]): [number, number] {
    const margin = 12
    const w = this.canvas.width - 2 * margin
    const h = this.canvas.height - 2 * margin
    // y grows downward on canvas; flip so the arena reads like a map
    return [margin + p[0] * w, margin + (1 - p[1]) * h]
  }

  drawFrame(segment: SegmentPath, progress: number): void {
    const ctx = this.ctx
    if (!ctx) return
    ctx.clearRect(0, 0, this.canvas.width, this.canvas.height)

    const goal = this.toPx([segment.goal.x, segment.goal.y])
    const goalR = segment.goal.radius * (this.canvas.width - 24)
    ctx.beginPath()
    ctx.arc(goal[0], goal[1], Math.max(goalR, 4), 0, 2 * Math.PI)
    ctx.strokeStyle = GOAL_COLOR
    ctx.lineWidth = 2
    ctx.stroke()

    const pts = segment.points.map((p) => this.toPx(p))
    ctx.beginPath()
    ctx.moveTo(pts[0][0], pts[0][1])
    for (const [x, y] of pts.slice(1)) ctx.lineTo(x, y)
    ctx.strokeStyle = TRAIL_COLOR
    ctx.lineWidth = 1.5
    ctx.stroke()

    // played part of the path
    const upto = Math.max(1, Math.ceil(progress * (pts.length - 1)) + 1)
    ctx.beginPath()
    ctx.moveTo(pts[0][0], pts[0][1])
    for (const [x, y] of pts.slice(1, upto)) ctx.lineTo(x, y)
    ctx.strokeStyle = PATH_COLOR
    ctx.lineWidth = 2.5
    ctx.stroke()

    const start = this.toPx(segment.start)
    ctx.beginPath()
    ctx.arc(start[0], start[1], 5, 0, 2 * Math.PI)
    ctx.fillStyle = START_COLOR
    ctx.fill()

    const dotIndex = Math.min(pts.length - 1, Math.floor(progress * (pts.length - 1)))
    ctx.beginPath()
    ctx.arc(pts[dotIndex][0], pts[dotIndex][1], 6, 0, 2 * Math.PI)
    ctx.fillStyle = DOT_COLOR
    ctx.fill()
  }

  /** Play the path once; resolves when the animation completes. */
  animate(segment: SegmentPath, durationMs: number): Promise<void> {
    if (durationMs <= 0) {
      this.drawFrame(segment, 1)
      return Promise.resolve()
    }
    return new Promise((resolve) => {
      const started = performance.now()
      const tick = () => {
        const progress = Math.min(1, (performance.now() - started) / durationMs)
        this.drawFrame(segment, progress)
        if (progress >= 1) resolve()
        else requestAnimationFrame(tick)
      }
      requestAnimationFrame(tick)
    })
  }
}
