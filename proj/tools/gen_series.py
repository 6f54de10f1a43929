#!/usr/bin/env python3
"""Generate the bundled solar and wind capacity-factor series.

Five years (2015-2019) of synthetic hourly capacity factors for an inland
North-African site cluster. Solar combines a clear-sky elevation profile
with an AR(1) weather attenuation; wind drives a turbine power curve with
Weibull-distributed speeds obtained from a Gaussian copula AR(1) process.
Each calendar year is calibrated by bisection so its mean capacity factor
matches the published site-selection thresholds exactly (0.246 solar,
0.500 wind).
"""

import argparse
import math
import os

import numpy as np

YEARS = [(2015, 8760), (2016, 8784), (2017, 8760), (2018, 8760), (2019, 8760)]
TOTAL = sum(h for _, h in YEARS)
LATITUDE = 28.0  # degrees north
SOLAR_TARGET = 0.246
WIND_TARGET = 0.500


def ar1(rng, n, phi, burn=500):
    eps = rng.standard_normal(n + burn)
    out = np.empty(n + burn)
    out[0] = eps[0]
    c = math.sqrt(1.0 - phi * phi)
    for i in range(1, n + burn):
        out[i] = phi * out[i - 1] + c * eps[i]
    return out[burn:]


def clear_sky(hours_in_year, day0):
    """Clear-sky capacity factor from solar elevation, hour by hour."""
    t = np.arange(hours_in_year)
    day = day0 + t / 24.0
    hour = t % 24
    decl = np.radians(23.45) * np.sin(2.0 * np.pi * (284.0 + day) / 365.25)
    lat = math.radians(LATITUDE)
    # hour angle, solar noon at 12:00 local time
    ha = np.radians(15.0 * (hour - 12.0 + 0.5))
    sin_alt = (np.sin(lat) * np.sin(decl)
               + np.cos(lat) * np.cos(decl) * np.cos(ha))
    cf = np.clip(sin_alt, 0.0, None)
    # mild air-mass attenuation near the horizon
    return cf * (1.0 - 0.22 * np.exp(-4.0 * cf))


def sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def calibrate(f, target, lo, hi, iters=80):
    """Bisection for the root of mean(f(p)) - target; f increasing in p."""
    flo, fhi = f(lo).mean(), f(hi).mean()
    if not (flo <= target <= fhi):
        raise RuntimeError(
            f"target {target} outside reachable range [{flo:.4f}, {fhi:.4f}]")
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if f(mid).mean() < target:
            lo = mid
        else:
            hi = mid
    return f(0.5 * (lo + hi))


def solar_year(rng, hours, day0):
    clear = clear_sky(hours, day0)
    g = ar1(rng, hours, 0.985)
    # weather attenuation in (0,1); the offset is the calibration knob
    return calibrate(lambda mu: clear * sigmoid(mu + 1.1 * g),
                     SOLAR_TARGET, -12.0, 12.0)


def power_curve(v, v_in=3.5, v_rated=12.5):
    ramp = ((v - v_in) / (v_rated - v_in)) ** 3
    return np.clip(np.where(v < v_in, 0.0, ramp), 0.0, 1.0)


def wind_year(rng, hours):
    g = ar1(rng, hours, 0.97)
    u = 0.5 * (1.0 + np.vectorize(math.erf)(g / math.sqrt(2.0)))
    u = np.clip(u, 1e-12, 1.0 - 1e-12)
    k = 2.1
    quantile = (-np.log1p(-u)) ** (1.0 / k)
    # Weibull scale is the calibration knob
    return calibrate(lambda lam: power_curve(lam * quantile),
                     WIND_TARGET, 2.0, 18.0)


def timestamps():
    start = np.datetime64("2015-01-01T00:00")
    return start + np.arange(TOTAL) * np.timedelta64(1, "h")


def write_csv(path, times, values):
    with open(path, "w", newline="\n") as f:
        f.write("time,cf\n")
        for ts, v in zip(times, values):
            f.write(f"{ts},{v:.6f}\n")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default=os.path.join(
        os.path.dirname(__file__), "..", "data", "series"))
    ap.add_argument("--seed", type=int, default=20150101)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    solar_parts, wind_parts = [], []
    day0 = 0.0
    for year, hours in YEARS:
        solar_parts.append(solar_year(rng, hours, day0))
        wind_parts.append(wind_year(rng, hours))
        day0 += hours / 24.0

    solar = np.concatenate(solar_parts)
    wind = np.concatenate(wind_parts)
    assert solar.shape == wind.shape == (TOTAL,)
    assert np.all((solar >= 0.0) & (solar <= 1.0))
    assert np.all((wind >= 0.0) & (wind <= 1.0))
    for name, series, target in [("solar", solar, SOLAR_TARGET),
                                 ("wind", wind, WIND_TARGET)]:
        offset = 0
        for year, hours in YEARS:
            mean = series[offset:offset + hours].mean()
            assert abs(mean - target) < 1e-9, (name, year, mean)
            offset += hours

    os.makedirs(args.out, exist_ok=True)
    times = timestamps()
    write_csv(os.path.join(args.out, "solar_cf.csv"), times, solar)
    write_csv(os.path.join(args.out, "wind_cf.csv"), times, wind)
    print(f"wrote {TOTAL} rows per series to {args.out}")
    print(f"solar mean {solar.mean():.6f}  wind mean {wind.mean():.6f}")


if __name__ == "__main__":
    main()
