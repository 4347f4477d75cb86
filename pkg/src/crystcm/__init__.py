"""Crystallographic elliptic Calogero-Moser systems for G(m,1,n).

Modules: ``kernel`` (theta/Weierstrass functions, jets), ``groups``
(reflections, hypertori, orbit labels), ``dunkl`` (rational, classical and
elliptic Dunkl operators), ``construction`` (the t -> 0 limit, explicit
forms, commutativity, classical flows), ``integrability`` (integer families,
Frobenius tests) and ``config``/``reports``/``cli`` (batch driver).
"""

__version__ = "0.1.0"
