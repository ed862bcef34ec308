"""Ready-made maps and certificates for the two exactly-known Julia sets.

The square map z -> z^2 has the unit circle as its Julia set; the
airfoil-free Chebyshev-like map z -> z^2 - 2 has the segment [-2, 2].
Both certificates are built here: covers from inverse-iteration clouds,
the derivative sup bound by interval evaluation, K1 derived exactly, and
the remaining constants asserted with documented safety margins and
validated computationally.
"""

from __future__ import annotations

from functools import lru_cache
from pathlib import Path

from .certificate import Certificate, derive_alpha_beta, derive_K1
from .cover import build_cover_inverse_iteration, inflate
from .dyadic import ComplexDyadic, Dyadic
from .maps import MapSpec, sup_df_on_cover

__all__ = ["circle_map", "segment_map", "circle_certificate",
           "segment_certificate", "preset", "write_preset"]


def circle_map() -> MapSpec:
    return MapSpec.quadratic(ComplexDyadic.from_ints(0))


def segment_map() -> MapSpec:
    return MapSpec.quadratic(ComplexDyadic.from_ints(-2))


_NOTES_CIRCLE = {
    "lam": "asserted shrinking rate; first pullback of an r-disk has "
           "diameter ~0.32 and later steps contract by <= 0.59, both "
           "well under 13/16",
    "r": "2r-band around the circle stays clear of the critical point 0",
    "mu": "vacuous for this map: no critical point lies on the circle",
    "eps": "validated computationally by the neighborhood-image check",
    "K1": "eps/4, from the quarter-disk image of univalent inverse branches",
    "K2": "asserted; sampled exit products dist*|Df^k| stay below ~0.14, "
          "margin >= 3x",
    "C": "asserted mild growth rate; sampled exits show no sqrt(k) growth",
    "R_hat": "interval evaluation of |f'| over the inflated cover",
}

_NOTES_SEGMENT = {
    "lam": "asserted shrinking rate; the square-root passage at the "
           "critical point costs at most rate^(n/2) ~ 0.71^n, margin to 29/32",
    "r": "critical point 0 lies on the segment itself, so the 2r-band "
         "minus the set contains no critical points",
    "mu": "critical orbit is 0 -> -2 -> 2 -> 2, so |f^n(0) - 0| = 2 for "
          "all n >= 1 and any mu in (0,1) works",
    "eps": "validated computationally by the neighborhood-image check",
    "K1": "eps/4, from the quarter-disk image of univalent inverse branches",
    "K2": "asserted; sampled exit products stay below ~0.1, margin >= 4x",
    "C": "asserted mild growth rate",
    "R_hat": "interval evaluation of |f'| over the inflated cover",
}


@lru_cache(maxsize=2)
def circle_certificate() -> Certificate:
    """Certificate for z -> z^2 on the unit circle (m=8, eps=2^-6)."""
    f = circle_map()
    m = 8
    eps = Dyadic(1, -6)
    r = Dyadic(9, -5)
    lam = Dyadic(13, -4)
    raw = build_cover_inverse_iteration(f, 13, m, ComplexDyadic.from_ints(1))
    japprox = inflate(raw, Dyadic(1, -m))
    two_eps = eps.scale2(1).round_frac(m, "ceil")
    U = inflate(japprox, two_eps + Dyadic(2, -m))
    r_hat = sup_df_on_cover(f, japprox, r)
    alpha, beta = derive_alpha_beta(lam, r, r_hat)
    prov = {"lam": "user-asserted", "r": "user-asserted", "mu": "user-asserted",
            "eps": "user-asserted", "K1": "rigorous", "K2": "user-asserted",
            "C": "user-asserted", "alpha": "rigorous", "beta": "rigorous",
            "R_hat": "rigorous"}
    return Certificate(
        lam=lam, r=r, mu=Dyadic(1, -1), eps=eps, U=U,
        K1=derive_K1(eps), K2=Dyadic(1, -1), C=Dyadic(35, -5),
        alpha=alpha, beta=beta, R_hat=r_hat, julia_approx=japprox,
        provenance=prov, notes=dict(_NOTES_CIRCLE),
    )


@lru_cache(maxsize=2)
def segment_certificate() -> Certificate:
    """Certificate for z -> z^2 - 2 on the segment [-2, 2] (m=10)."""
    f = segment_map()
    m = 10
    eps = Dyadic(3, -9)
    r = Dyadic(1, -3)
    lam = Dyadic(29, -5)
    raw = build_cover_inverse_iteration(f, 15, m, ComplexDyadic.from_ints(2))
    japprox = inflate(raw, Dyadic(1, -m))
    two_eps = eps.scale2(1).round_frac(m, "ceil")
    U = inflate(japprox, two_eps + Dyadic(2, -m))
    r_hat = sup_df_on_cover(f, japprox, r)
    alpha, beta = derive_alpha_beta(lam, r, r_hat)
    prov = {"lam": "user-asserted", "r": "user-asserted", "mu": "rigorous",
            "eps": "user-asserted", "K1": "rigorous", "K2": "user-asserted",
            "C": "user-asserted", "alpha": "rigorous", "beta": "rigorous",
            "R_hat": "rigorous"}
    return Certificate(
        lam=lam, r=r, mu=Dyadic(1, -1), eps=eps, U=U,
        K1=derive_K1(eps), K2=Dyadic(1, -1), C=Dyadic(35, -5),
        alpha=alpha, beta=beta, R_hat=r_hat, julia_approx=japprox,
        provenance=prov, notes=dict(_NOTES_SEGMENT),
    )


def preset(name: str) -> tuple[MapSpec, Certificate]:
    if name == "circle":
        return circle_map(), circle_certificate()
    if name == "segment":
        return segment_map(), segment_certificate()
    raise ValueError(f"unknown preset {name!r}; use circle or segment")


def write_preset(name: str, out_dir) -> tuple[Path, Path]:
    """Write <name>.map.json and <name>.cert.json (covers inline)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    f, cert = preset(name)
    map_path = out / f"{name}.map.json"
    cert_path = out / f"{name}.cert.json"
    f.save(map_path)
    cert.save(cert_path)
    return map_path, cert_path
