// Component-graph layout: layered left-to-right by causal rank.
// Strongly connected components (combinational loops) collapse into a
// single group node so the layered ranking runs on a DAG.

import type { ModelDocument } from "./types.js";

export interface GraphNode {
  id: string; // component id, or "loop:a+b" for a collapsed group
  members: string[]; // singleton for plain components
  isLoop: boolean;
  rank: number;
  row: number;
  x: number;
  y: number;
}

export interface GraphEdge {
  from: string; // node ids (post-collapse)
  to: string;
}

export interface GraphLayout {
  nodes: GraphNode[];
  edges: GraphEdge[];
  width: number;
  height: number;
}

const COL_WIDTH = 150;
const ROW_HEIGHT = 70;
const MARGIN = 40;

function feederOf(connection: { from: string }): string {
  const src = connection.from;
  return src.endsWith(".out") ? src.slice(0, -4) : src;
}

function targetOf(connection: { to: string }): string {
  const dot = connection.to.indexOf(".");
  return dot < 0 ? connection.to : connection.to.slice(0, dot);
}

/** Tarjan's strongly connected components, iterative. */
export function stronglyConnected(
  ids: string[],
  successors: Map<string, string[]>,
): string[][] {
  const index = new Map<string, number>();
  const lowlink = new Map<string, number>();
  const onStack = new Set<string>();
  const stack: string[] = [];
  const result: string[][] = [];
  let counter = 0;

  for (const root of ids) {
    if (index.has(root)) continue;
    const work: [string, number][] = [[root, 0]];
    index.set(root, counter);
    lowlink.set(root, counter);
    counter += 1;
    stack.push(root);
    onStack.add(root);
    while (work.length > 0) {
      const top = work[work.length - 1]!;
      const [node] = top;
      const succ = successors.get(node) ?? [];
      let advanced = false;
      while (top[1] < succ.length) {
        const next = succ[top[1]]!;
        top[1] += 1;
        if (!index.has(next)) {
          index.set(next, counter);
          lowlink.set(next, counter);
          counter += 1;
          stack.push(next);
          onStack.add(next);
          work.push([next, 0]);
          advanced = true;
          break;
        }
        if (onStack.has(next)) {
          lowlink.set(node, Math.min(lowlink.get(node)!, index.get(next)!));
        }
      }
      if (advanced) continue;
      work.pop();
      const parent = work[work.length - 1];
      if (parent) {
        lowlink.set(parent[0], Math.min(lowlink.get(parent[0])!, lowlink.get(node)!));
      }
      if (lowlink.get(node) === index.get(node)) {
        const scc: string[] = [];
        for (;;) {
          const member = stack.pop()!;
          onStack.delete(member);
          scc.push(member);
          if (member === node) break;
        }
        result.push(scc.sort());
      }
    }
  }
  return result;
}

export function layoutModel(model: ModelDocument): GraphLayout {
  const ids = model.components.map((c) => c.id);
  const stateful = new Set(
    model.components.filter((c) => c.stateful).map((c) => c.id),
  );
  const successors = new Map<string, string[]>(ids.map((id) => [id, []]));
  const rawEdges: [string, string][] = [];
  for (const conn of model.connections) {
    const from = feederOf(conn);
    const to = targetOf(conn);
    rawEdges.push([from, to]);
    if (!stateful.has(to)) {
      successors.get(from)?.push(to);
    }
  }

  const sccs = stronglyConnected(ids, successors);
  const groupOf = new Map<string, string>();
  const nodes: GraphNode[] = [];
  for (const scc of sccs) {
    const selfLoop =
      scc.length === 1 &&
      (successors.get(scc[0]!) ?? []).includes(scc[0]!);
    const isLoop = scc.length > 1 || selfLoop;
    const id = isLoop ? `loop:${scc.join("+")}` : scc[0]!;
    for (const member of scc) groupOf.set(member, id);
    nodes.push({ id, members: scc, isLoop, rank: 0, row: 0, x: 0, y: 0 });
  }

  const nodeById = new Map(nodes.map((n) => [n.id, n]));
  const edgeSet = new Set<string>();
  const edges: GraphEdge[] = [];
  for (const [from, to] of rawEdges) {
    const a = groupOf.get(from)!;
    const b = groupOf.get(to)!;
    if (a === b) continue;
    const key = `${a}->${b}`;
    if (!edgeSet.has(key)) {
      edgeSet.add(key);
      edges.push({ from: a, to: b });
    }
  }

  // longest-path rank over the condensation (delayed edges included so a
  // purely sequential pipeline still reads left to right)
  const indegree = new Map<string, number>(nodes.map((n) => [n.id, 0]));
  for (const e of edges) indegree.set(e.to, (indegree.get(e.to) ?? 0) + 1);
  const queue = nodes.filter((n) => (indegree.get(n.id) ?? 0) === 0).map((n) => n.id);
  const order: string[] = [];
  const pending = new Map(indegree);
  while (queue.length > 0) {
    const id = queue.shift()!;
    order.push(id);
    for (const e of edges) {
      if (e.from !== id) continue;
      const left = (pending.get(e.to) ?? 0) - 1;
      pending.set(e.to, left);
      if (left === 0) queue.push(e.to);
    }
  }
  for (const id of order) {
    const node = nodeById.get(id)!;
    for (const e of edges) {
      if (e.to !== id) continue;
      const from = nodeById.get(e.from)!;
      node.rank = Math.max(node.rank, from.rank + 1);
    }
  }

  const byRank = new Map<number, GraphNode[]>();
  for (const node of nodes) {
    const bucket = byRank.get(node.rank) ?? [];
    bucket.push(node);
    byRank.set(node.rank, bucket);
  }
  let maxRows = 1;
  for (const [rank, bucket] of [...byRank.entries()].sort((a, b) => a[0] - b[0])) {
    bucket.sort((a, b) => a.id.localeCompare(b.id));
    bucket.forEach((node, row) => {
      node.row = row;
      node.x = MARGIN + rank * COL_WIDTH;
      node.y = MARGIN + row * ROW_HEIGHT;
    });
    maxRows = Math.max(maxRows, bucket.length);
  }
  const maxRank = Math.max(0, ...nodes.map((n) => n.rank));
  return {
    nodes,
    edges,
    width: MARGIN * 2 + (maxRank + 1) * COL_WIDTH,
    height: MARGIN * 2 + maxRows * ROW_HEIGHT,
  };
}
