"""
The connected-diagram resummation of the three-particle resolvent.

Strings record how a sequence of pair interactions merges particles into
clusters. Summing the Neumann series by string splits the resolvent G into a
disconnected part D and a connected kernel I with G = D + I G. The script
prints the string census, the identity residual at a few spectral parameters,
and the decay of the connected kernel as z moves away from the spectrum.
"""

import numpy as np

from lattice_hvz import FiberContext, TorusGrid, WvWGraph, assemble, model_l2, string_census, string_of_graph

print("strings by final block count:")
for N in (2, 3, 4):
    print(f"  N = {N}: {string_census(N)}")

g = WvWGraph(3, ((1, 2), (1, 2), (2, 3)))
print(f"\ngraph {g.links} has string {[str(D) for D in string_of_graph(g).chain]}")

ctx = FiberContext.build(model_l2(), [0.0], TorusGrid(4))
print(f"\nfiber dimension {ctx.dim}")
for z in (-20.0, -20 + 5j, 1.5 + 2j):
    parts = assemble(ctx, z)
    G = ctx.resolvent(None, z)
    res = np.linalg.norm(G - parts.D - parts.I @ G, 2)
    print(f"  z = {z!s:>10}: |G - D - I G| = {res:.1e}, strings used {parts.string_count}")

print("\nconnected kernel:")
for z in (-10, -20, -40, -80):
    print(f"  z = {z:4d}: |I(z)| = {np.linalg.norm(assemble(ctx, z).I, 2):.5f}")
