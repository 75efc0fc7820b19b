// In-memory stand-in for the simulation service, used by the unit tests.
// The device semantics (staging, wrap-around, atomic commit) mirror the
// wire protocol exactly; the particle physics is a toy: the particle
// relaxes toward a height that depends on which rings are enabled.

import { PickingScript } from '../src/api.js'

export const PHASE_STEPS = 2500

export interface MockDevice {
  channel_count: number
  rings: number
  live_phases: number[]
  staged_phases: number[]
  ring_enable: boolean[]
  staged_ring_enable: boolean[]
  commit_counter: number
}

export function newDevice(channelCount = 56, rings = 4): MockDevice {
  return {
    channel_count: channelCount,
    rings,
    live_phases: new Array(channelCount).fill(0),
    staged_phases: new Array(channelCount).fill(0),
    ring_enable: new Array(rings).fill(false),
    staged_ring_enable: new Array(rings).fill(false),
    commit_counter: 0,
  }
}

export class WireError extends Error {
  constructor(readonly kind: 'parse' | 'range', message: string, readonly offset = 0) {
    super(message)
  }
}

/** Apply one wire-grammar line; returns the QUERY reply if any. */
export function applyLine(dev: MockDevice, rawLine: string): string | null {
  const line = rawLine.split('#', 1)[0].trim()
  if (!line) return null
  const parts = line.split(/\s+/)
  const op = parts[0].toUpperCase()
  const intArg = (i: number): number => {
    const n = Number(parts[i])
    if (!Number.isInteger(n)) throw new WireError('parse', `expected integer at arg ${i}`)
    return n
  }
  switch (op) {
    case 'INC':
    case 'DEC':
    case 'SET': {
      if (parts.length !== 3) throw new WireError('parse', `${op} takes 2 arguments`)
      const ch = intArg(1)
      const val = intArg(2)
      if (ch < 0 || ch >= dev.channel_count) throw new WireError('range', `channel ${ch} out of range`)
      if (val < 0 || val >= PHASE_STEPS) throw new WireError('range', `value ${val} out of range`)
      if (op === 'SET') dev.staged_phases[ch] = val
      else if (op === 'INC') dev.staged_phases[ch] = (dev.staged_phases[ch] + val) % PHASE_STEPS
      else dev.staged_phases[ch] = (dev.staged_phases[ch] - val + PHASE_STEPS) % PHASE_STEPS
      return null
    }
    case 'RING': {
      if (parts.length !== 3) throw new WireError('parse', 'RING takes 2 arguments')
      const level = intArg(1)
      const mode = parts[2].toUpperCase()
      if (level < 1 || level > dev.rings) throw new WireError('range', `ring ${level} out of range`)
      if (mode !== 'ON' && mode !== 'OFF') throw new WireError('parse', 'expected ON or OFF')
      dev.staged_ring_enable[level - 1] = mode === 'ON'
      return null
    }
    case 'COMMIT':
      if (parts.length !== 1) throw new WireError('parse', 'COMMIT takes no arguments')
      dev.live_phases = [...dev.staged_phases]
      dev.ring_enable = [...dev.staged_ring_enable]
      dev.commit_counter += 1
      return null
    case 'QUERY':
      return JSON.stringify(snapshot(dev))
    default:
      throw new WireError('parse', `unknown command ${parts[0]}`)
  }
}

export function snapshot(dev: MockDevice): Record<string, unknown> {
  return {
    channel_count: dev.channel_count,
    rings: dev.rings,
    live_phases: [...dev.live_phases],
    ring_enable: [...dev.ring_enable],
    commit_counter: dev.commit_counter,
  }
}

const SCRIPT: PickingScript = {
  config_hash: 'mock',
  channel_count: 56,
  rings: 4,
  target_height: 0.05,
  stages: [
    { name: 'a', expected_height: 0.005, lines: ['RING 1 ON', 'RING 2 ON', 'COMMIT'] },
    { name: 'b', expected_height: 0.01, lines: ['SET 14 750', 'COMMIT'] },
    { name: 'c', expected_height: 0.015, lines: ['INC 14 500', 'COMMIT'] },
    { name: 'd', expected_height: 0.03, lines: ['RING 3 ON', 'COMMIT'] },
    { name: 'e', expected_height: 0.045, lines: ['RING 4 ON', 'COMMIT'] },
    { name: 'f', expected_height: 0.05, lines: ['INC 42 250', 'COMMIT'] },
  ],
}

export class MockService {
  devices = new Map<string, MockDevice>()
  heights = new Map<string, number>()
  private nextId = 1

  /** fetch-compatible entry point for ServiceClient. */
  fetch = async (url: string, init?: RequestInit): Promise<Response> => {
    const method = init?.method ?? 'GET'
    const path = url.replace(/^https?:\/\/[^/]+/, '')
    const body = init?.body ? JSON.parse(String(init.body)) : undefined
    try {
      return json(this.route(method, path, body))
    } catch (err) {
      if (err instanceof WireError) {
        return json({ detail: { error: err.kind, message: err.message, offset: err.offset } }, 422)
      }
      if (err instanceof SessionError) {
        return json({ detail: { error: 'unknown session', id: err.message } }, 404)
      }
      throw err
    }
  }

  private route(method: string, path: string, body: any): unknown {
    if (method === 'POST' && path === '/sessions') {
      const sid = `mock-${this.nextId++}`
      this.devices.set(sid, newDevice())
      this.heights.set(sid, 0.001)
      return { session_id: sid, channel_count: 56, rings: 4, config_hash: 'mock' }
    }
    if (path === '/script') return SCRIPT

    const m = path.match(/^\/sessions\/([^/]+)(\/[a-z-]+)?/)
    if (!m) throw new Error(`bad path ${path}`)
    const [, sid, sub] = m
    const dev = this.devices.get(sid)
    if (!dev) throw new SessionError(sid)

    if (method === 'DELETE' && !sub) {
      this.devices.delete(sid)
      return { deleted: sid }
    }
    if (method === 'POST' && sub === '/command') {
      const reply = applyLine(dev, body.line)
      return { ok: true, commit_counter: dev.commit_counter, reply: reply ? JSON.parse(reply) : null }
    }
    if (sub === '/device') return snapshot(dev)
    if (sub === '/particle') return this.particle(sid)
    if (sub === '/nodes') return { nodes: this.nodes(dev) }
    if (sub === '/profile') {
      const z = Array.from({ length: 50 }, (_, i) => 0.001 + (0.06 * i) / 49)
      return {
        z,
        potential: z.map((v) => Math.cos((v / 0.0042875) * Math.PI) * 1e-9),
        force_z: z.map(() => 0),
        weight: 9.82e-6,
      }
    }
    if (method === 'POST' && sub === '/step-settle') {
      if (!body || body.steps < 1) throw new WireError('range', 'steps must be >= 1')
      // relax toward the target height set by the ring pattern
      const target = this.targetHeight(dev)
      const z = this.heights.get(sid)!
      const moved = z + (target - z) * 0.9
      this.heights.set(sid, moved)
      return {
        commit_counter: dev.commit_counter,
        particle: this.particle(sid).valueOf(),
        nodes: this.nodes(dev),
      }
    }
    throw new Error(`unhandled ${method} ${path}`)
  }

  private targetHeight(dev: MockDevice): number {
    const on = dev.ring_enable.filter(Boolean).length
    if (on === 0) return 0.001
    const base = [0.001, 0.005, 0.015, 0.03, 0.05][on]
    // phase advance on the highest active ring nudges the node upward
    const top = dev.ring_enable.lastIndexOf(true)
    const per = dev.channel_count / dev.rings
    const phase = dev.live_phases[top * per]
    return base + (phase / PHASE_STEPS) * 0.01
  }

  private particle(sid: string) {
    const z = this.heights.get(sid)!
    return { position: [0, 0, z] as [number, number, number], settled: true, escaped: false }
  }

  private nodes(dev: MockDevice) {
    const target = this.targetHeight(dev)
    return target > 0.002
      ? [{ z: target, stability: 'stable', potential: -1e-10 }]
      : []
  }
}

class SessionError extends Error {}

function json(payload: unknown, status = 200): Response {
  return new Response(JSON.stringify(payload), {
    status,
    headers: { 'content-type': 'application/json' },
  })
}
