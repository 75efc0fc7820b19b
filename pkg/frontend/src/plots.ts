// Canvas plots: the axial potential curve with the particle marker, and
// the particle-height trace over commits. Plain 2D canvas, no deps.

import { AxialProfile, NodeInfo } from './api.js'

interface Extent {
  lo: number
  hi: number
}

function pad(e: Extent, frac = 0.05): Extent {
  const span = e.hi - e.lo || 1
  return { lo: e.lo - frac * span, hi: e.hi + frac * span }
}

function scale(v: number, e: Extent, pixels: number, flip = false): number {
  const t = (v - e.lo) / (e.hi - e.lo)
  return (flip ? 1 - t : t) * pixels
}

export function drawAxialPotential(
  canvas: HTMLCanvasElement,
  profile: AxialProfile,
  particleZ: number,
  nodes: NodeInfo[],
): void {
  const ctx = canvas.getContext('2d')
  if (!ctx) return
  const { width: w, height: h } = canvas
  ctx.clearRect(0, 0, w, h)

  const zExt = pad({ lo: Math.min(...profile.z), hi: Math.max(...profile.z) })
  const uExt = pad({
    lo: Math.min(...profile.potential),
    hi: Math.max(...profile.potential),
  })

  ctx.strokeStyle = '#4aa3ff'
  ctx.lineWidth = 1.5
  ctx.beginPath()
  profile.z.forEach((z, i) => {
    const x = scale(z, zExt, w)
    const y = scale(profile.potential[i], uExt, h, true)
    if (i === 0) ctx.moveTo(x, y)
    else ctx.lineTo(x, y)
  })
  ctx.stroke()

  // trap nodes as vertical ticks
  ctx.strokeStyle = '#888'
  for (const node of nodes) {
    const x = scale(node.z, zExt, w)
    ctx.beginPath()
    ctx.moveTo(x, 0)
    ctx.lineTo(x, h)
    ctx.setLineDash([2, 4])
    ctx.stroke()
    ctx.setLineDash([])
  }

  // particle marker on the curve (nearest sample)
  let best = 0
  profile.z.forEach((z, i) => {
    if (Math.abs(z - particleZ) < Math.abs(profile.z[best] - particleZ)) best = i
  })
  ctx.fillStyle = '#ff5c5c'
  ctx.beginPath()
  ctx.arc(
    scale(particleZ, zExt, w),
    scale(profile.potential[best], uExt, h, true),
    5,
    0,
    2 * Math.PI,
  )
  ctx.fill()
}

export function drawHeightTrace(
  canvas: HTMLCanvasElement,
  trace: { commit: number; z: number }[],
  targetHeight: number | null,
): void {
  const ctx = canvas.getContext('2d')
  if (!ctx) return
  const { width: w, height: h } = canvas
  ctx.clearRect(0, 0, w, h)
  if (trace.length === 0) return

  const cExt = pad({ lo: trace[0].commit, hi: trace[trace.length - 1].commit })
  const zTop = Math.max(targetHeight ?? 0, ...trace.map((p) => p.z))
  const zExt = pad({ lo: 0, hi: zTop })

  if (targetHeight !== null) {
    const y = scale(targetHeight, zExt, h, true)
    ctx.strokeStyle = '#6c6'
    ctx.setLineDash([4, 4])
    ctx.beginPath()
    ctx.moveTo(0, y)
    ctx.lineTo(w, y)
    ctx.stroke()
    ctx.setLineDash([])
  }

  ctx.strokeStyle = '#ffb84d'
  ctx.lineWidth = 1.5
  ctx.beginPath()
  trace.forEach((p, i) => {
    const x = scale(p.commit, cExt, w)
    const y = scale(p.z, zExt, h, true)
    if (i === 0) ctx.moveTo(x, y)
    else ctx.lineTo(x, y)
  })
  ctx.stroke()
}
