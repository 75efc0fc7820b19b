import { beforeEach, describe, expect, it } from 'vitest'

import { ServiceClient } from '../src/api.js'
import { ConsoleSession, NUDGE_SMALL } from '../src/session.js'
import { MockService, applyLine, newDevice, snapshot } from './mock.js'

let service: MockService
let client: ServiceClient

beforeEach(() => {
  service = new MockService()
  client = new ServiceClient('http://mock', service.fetch)
})

describe('console session against the mock service', () => {
  it('opens with the device and particle from the server', async () => {
    const ses = await ConsoleSession.open(client)
    expect(ses.state.device.channel_count).toBe(56)
    expect(ses.state.particle.position[2]).toBeCloseTo(0.001)
  })

  it('ring toggle sends RING + COMMIT and reflects the new server state', async () => {
    const ses = await ConsoleSession.open(client)
    await ses.toggleRing(2)
    expect(ses.commandLog).toEqual(['RING 2 ON', 'COMMIT'])
    expect(ses.state.device.ring_enable[1]).toBe(true)
    await ses.toggleRing(2)
    expect(ses.commandLog.slice(2)).toEqual(['RING 2 OFF', 'COMMIT'])
    expect(ses.state.device.ring_enable[1]).toBe(false)
  })

  it('a nudge batches one INC per ring channel then commits', async () => {
    const ses = await ConsoleSession.open(client)
    await ses.nudgeRing(3, NUDGE_SMALL)
    const incs = ses.commandLog.filter((l) => l.startsWith('INC'))
    expect(incs).toHaveLength(14)
    expect(incs[0]).toBe('INC 28 25')
    expect(incs[13]).toBe('INC 41 25')
    expect(ses.commandLog.at(-1)).toBe('COMMIT')
    expect(ses.state.device.live_phases[28]).toBe(25)
  })

  it('negative nudge emits DEC and round-trips to zero', async () => {
    const ses = await ConsoleSession.open(client)
    await ses.nudgeRing(1, NUDGE_SMALL)
    await ses.nudgeRing(1, -NUDGE_SMALL)
    expect(ses.state.device.live_phases.slice(0, 14)).toEqual(new Array(14).fill(0))
  })

  it('rejected commands surface inline and are not logged', async () => {
    const ses = await ConsoleSession.open(client)
    await ses.dispatchLine('WOBBLE 1')
    expect(ses.state.lastError).toContain('unknown command')
    expect(ses.commandLog).toEqual([])
    await ses.dispatchLine('SET 3 9999')
    expect(ses.state.lastError).toContain('out of range')
    expect(ses.commandLog).toEqual([])
  })

  it('commits trigger a settle and extend the height trace', async () => {
    const ses = await ConsoleSession.open(client)
    await ses.dispatchLine('RING 1 ON')
    await ses.dispatchLine('RING 2 ON')
    expect(ses.state.heightTrace).toHaveLength(1) // staging does not move anything
    await ses.dispatchLine('COMMIT')
    expect(ses.state.heightTrace.length).toBeGreaterThan(1)
    expect(ses.displayedHeight()).toBeGreaterThan(0.001)
  })

  it('refresh is idempotent: the view equals the last pushed state', async () => {
    const ses = await ConsoleSession.open(client)
    await ses.toggleRing(1)
    const before = JSON.parse(JSON.stringify(ses.state.device))
    const height = ses.displayedHeight()
    await ses.refresh()
    expect(ses.state.device).toEqual(before)
    expect(ses.displayedHeight()).toBeCloseTo(height, 12)
  })

  it('stale push events are dropped (monotone commit counter)', async () => {
    const ses = await ConsoleSession.open(client)
    await ses.toggleRing(1)
    const height = ses.displayedHeight()
    ses.applyEvent({
      commit_counter: 0,
      particle: { position: [0, 0, 0.99], settled: true, escaped: false },
      nodes: [],
    })
    expect(ses.displayedHeight()).toBe(height)
  })

  it('auto-running all stages completes the checklist and lifts the particle', async () => {
    const ses = await ConsoleSession.open(client)
    const script = await ses.loadScript()
    for (let i = 0; i < script.stages.length; i++) {
      await ses.autoRunStage(i)
    }
    expect(ses.state.stages.every((s) => s.done)).toBe(true)
    expect(ses.displayedHeight()).toBeGreaterThanOrEqual(0.045)
  })

  it('the command log replays through a fresh device to the same state', async () => {
    const ses = await ConsoleSession.open(client)
    const script = await ses.loadScript()
    for (let i = 0; i < script.stages.length; i++) {
      await ses.autoRunStage(i)
    }
    await ses.nudgeRing(4, NUDGE_SMALL)
    const dev = newDevice()
    for (const line of ses.commandLog) applyLine(dev, line)
    expect(snapshot(dev)).toEqual(await client.device(ses.state.sessionId))
  })
})
