// Client-side copy of the evaluator's matching rule, used to sanity-check a
// review session against ground truth without a server round trip.  Semantics
// match the Python evaluator: records are points (start, end), a pair matches
// when each is the other's nearest neighbour and their Euclidean distance is
// within the radius (inclusive); ties on distance go to the lower index.

export interface MatchPoint {
  start: number;
  end: number;
}

export interface Metrics {
  tp: number;
  fp: number;
  fn: number;
  /** Percentages; null marks a metric whose denominator was zero. */
  precision: number | null;
  recall: number | null;
  f1: number | null;
}

function distance(a: MatchPoint, b: MatchPoint): number {
  return Math.hypot(a.start - b.start, a.end - b.end);
}

function nearest(record: MatchPoint, pool: readonly MatchPoint[]): number {
  let bestIndex = 0;
  let bestDistance = distance(record, pool[0]);
  for (let i = 1; i < pool.length; i++) {
    const d = distance(record, pool[i]);
    if (d < bestDistance) {
      bestIndex = i;
      bestDistance = d;
    }
  }
  return bestIndex;
}

/** Mutual-nearest pairs (predicted index, labeled index) within the radius. */
export function matchBidirectional(
  predicted: readonly MatchPoint[],
  labeled: readonly MatchPoint[],
  radius = 20,
): Array<[number, number]> {
  if (radius < 0) throw new RangeError(`radius must be >= 0, got ${radius}`);
  if (predicted.length === 0 || labeled.length === 0) return [];
  const nearestLabel = predicted.map(p => nearest(p, labeled));
  const nearestPred = labeled.map(g => nearest(g, predicted));
  const pairs: Array<[number, number]> = [];
  nearestLabel.forEach((j, i) => {
    if (nearestPred[j] === i && distance(predicted[i], labeled[j]) <= radius) {
      pairs.push([i, j]);
    }
  });
  return pairs;
}

export function computeMetrics(tp: number, fp: number, fn: number): Metrics {
  if (Math.min(tp, fp, fn) < 0) {
    throw new RangeError(`counts must be >= 0, got tp=${tp} fp=${fp} fn=${fn}`);
  }
  const precision = tp + fp > 0 ? (100 * tp) / (tp + fp) : null;
  const recall = tp + fn > 0 ? (100 * tp) / (tp + fn) : null;
  const f1 =
    precision === null || recall === null || precision + recall === 0
      ? null
      : (2 * precision * recall) / (precision + recall);
  return { tp, fp, fn, precision, recall, f1 };
}

export function evaluateRecords(
  predicted: readonly MatchPoint[],
  labeled: readonly MatchPoint[],
  radius = 20,
): Metrics {
  const tp = matchBidirectional(predicted, labeled, radius).length;
  return computeMetrics(tp, predicted.length - tp, labeled.length - tp);
}
