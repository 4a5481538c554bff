"""Independent reference computations used as test oracles.

None of these import the production solvers or risk code.
"""

from __future__ import annotations

import itertools
import math

import numpy as np


def grid_values(upper: float, step: float) -> np.ndarray:
    n = int(math.floor(upper / step + 1e-9))
    vals = np.arange(n + 1) * step
    if upper - vals[-1] > 1e-12:
        vals = np.append(vals, upper)
    return vals


def _step_value(avail, costs, demand, flex, flex_bid, cap, x, step):
    """Best welfare rate in one step for every net storage injection in ``x``,
    by enumerating generator outputs on the grid."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    best = np.full(x.shape, -np.inf)
    grids = [grid_values(a, step) for a in avail]
    if not grids:
        grids = [np.zeros(1)]
        costs = [0.0]
    first, rest = grids[0], grids[1:]
    rest_grid = np.array(list(itertools.product(*rest))) if rest else np.zeros((1, 0))
    rest_sum = rest_grid.sum(axis=1)
    rest_cost = rest_grid @ np.asarray(costs[1:], dtype=float) if rest else np.zeros(1)
    for q1 in first:
        supply = q1 + rest_sum[None, :] + x[:, None]
        ok = (supply >= -1e-9) & (supply <= demand + flex + 1e-9)
        inel = np.minimum(np.maximum(supply, 0.0), demand)
        fl = np.maximum(supply - demand, 0.0)
        val = cap * inel + flex_bid * fl - costs[0] * q1 - rest_cost[None, :]
        val = np.where(ok, val, -np.inf)
        best = np.maximum(best, val.max(axis=1))
    return best


def brute_force_welfare(config, capacities, step: float = 0.01) -> float:
    """Exhaustive grid search over generator outputs and storage actions for a
    single-scenario instance with at most one storage unit."""
    scen = config.scenarios[0]
    w = np.asarray(config.time_grid.weights)
    h = config.time_grid.step_hours
    T = len(w)
    d = config.demand
    gens = [t for t in config.technologies if not t.is_storage]
    stores = [t for t in config.technologies if t.is_storage]
    if len(stores) > 1:
        raise ValueError("oracle handles one storage unit")

    def avail(t, k):
        c = capacities[t.name]
        return c * scen.vre_profiles[t.name][k] if t.kind == "renewable" else c

    def cost(t):
        return t.var_cost + (t.heat_rate * scen.gas_price if t.fuel_indexed else 0.0)

    if not stores:
        total = 0.0
        for k in range(T):
            v = _step_value([avail(t, k) for t in gens], [cost(t) for t in gens], scen.demand_profile[k],
                            d.flexible_mw, d.flexible_bid, d.price_cap, [0.0], step)
            total += w[k] * v[0]
        return float(total)

    s = stores[0]
    P = capacities[s.name]
    E = P * s.storage_duration
    eta = s.round_trip_efficiency
    actions = np.concatenate([-grid_values(P, step)[::-1], grid_values(P, step)[1:]])
    tables = [
        _step_value([avail(t, k) for t in gens], [cost(t) for t in gens], scen.demand_profile[k],
                    d.flexible_mw, d.flexible_bid, d.price_cap, actions, step)
        - cost(s) * np.maximum(actions, 0.0)
        for k in range(T)
    ]
    delta = np.where(actions < 0, -eta * actions, -actions) * h  # state change per action
    best = -np.inf
    # enumerate the first T-1 actions, the cyclic condition pins the last one to the grid
    index = {round(v, 9): i for i, v in enumerate(delta)}
    for combo in itertools.product(range(len(actions)), repeat=T - 1):
        partial = sum(delta[i] for i in combo)
        j = index.get(round(-partial, 9))
        if j is None:
            continue
        seq = list(combo) + [j]
        path = np.cumsum([0.0] + [delta[i] for i in seq])
        if path.max() - path.min() > E + 1e-9:
            continue
        val = sum(w[k] * tables[k][i] for k, i in enumerate(seq))
        best = max(best, val)
    return float(best)


def cvar_optimization_form(values, probs, psi) -> float:
    """sup over zeta of zeta - (1/psi) E[(zeta - u)^+]; the sup is attained at a data point."""
    values = np.asarray(values, dtype=float)
    probs = np.asarray(probs, dtype=float)
    return max(z - np.dot(probs, np.maximum(z - values, 0.0)) / psi for z in values)


def present_value_factor(rate: float, years: int) -> float:
    return sum((1.0 + rate) ** -t for t in range(1, years + 1))


def npv_irr(revenue: float, capital: float, years: int, lo=-0.99, hi=10.0, tol=1e-12) -> float:
    """Rate where the NPV of a level revenue stream equals the capital outlay,
    by bisection on the sign of the NPV."""
    npv = lambda r: revenue * present_value_factor(r, years) - capital
    for _ in range(300):
        mid = 0.5 * (lo + hi)
        if npv(mid) > 0:
            lo = mid
        else:
            hi = mid
        if hi - lo < tol:
            break
    return 0.5 * (lo + hi)


def screening_curve_split(costs, fixed, durations_h, loads_mw):
    """Least-cost capacities for a 2-level load duration curve with two
    technologies, from the screening-curve crossover."""
    (c_base, c_peak), (f_base, f_peak) = costs, fixed
    # the base unit is cheaper beyond this many running hours per year
    crossover = (f_base - f_peak) / (c_peak - c_base)
    (h_high, h_low), (l_high, l_low) = durations_h, loads_mw
    base = 0.0
    # the low load block runs for h_high + h_low hours, the increment above it for h_high
    if h_high + h_low > crossover:
        base = l_low
    if h_high > crossover:
        base = l_high
    return base, l_high - base
