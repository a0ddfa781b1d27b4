"""Tour of the single-photon element library.

Every optical element is a matrix on a truncated (path, polarization, OAM)
mode space.  This script walks through the building blocks used everywhere
else: wave plates, q-plates, spiral phase plates, Dove prisms, and the
polarizing beam splitter, all under the frozen phase conventions.
"""

import math

from cpfsim import elements as el
from cpfsim.modes import Mode, ModeSpace, SinglePhotonState, apply_to_single_photon

space = ModeSpace(paths=("A", "B", "C", "D"), truncation=4)
print(f"mode space: {len(space.paths)} paths x 2 polarizations x "
      f"[-{space.truncation}, {space.truncation}] -> dim {space.dim}\n")


def show(label, state):
    terms = ", ".join(f"{m} {a:+.3f}" for m, a in state.terms(1e-9))
    print(f"{label:<42s} {terms}")


h0 = SinglePhotonState.from_terms(space, {Mode("A", "H", 0): 1.0})

show("HWP(pi/8) on |H,0>:",
     apply_to_single_photon(el.hwp(space, "A", math.pi / 8), h0))
show("QWP(pi/4) on |H,0>  (-> circular R):",
     apply_to_single_photon(el.qwp(space, "A", math.pi / 4), h0))

# The q-plate swaps circular handedness while shifting the azimuthal index.
qp = el.qplate(space, "A", 0.5)
show("QP(1/2) on |H,0>:", apply_to_single_photon(qp, h0))

l1 = SinglePhotonState.from_terms(space, {Mode("A", "H", 1): 1.0})
show("SPP(-1) on |H,+1>:",
     apply_to_single_photon(el.spp(space, "A", -1), l1))
show("DP(pi/4) on |H,+1>  (sign flip of l, phase):",
     apply_to_single_photon(el.dove_prism(space, "A", math.pi / 4), l1))
show("mirror on |H,+1>  (reflection inverts l):",
     apply_to_single_photon(el.mirror(space, "A"), l1))

# PBS: H transmits, V reflects with a fixed phase and an OAM sign flip.
pbs = el.pbs(space, ("A", "B"), ("C", "D"))
v1 = SinglePhotonState.from_terms(space, {Mode("A", "V", 1): 1.0})
show("PBS on |V,+1> at A  (reflected to D):", apply_to_single_photon(pbs, v1))

# The parity interferometer correlates polarization with the sign of l; two
# of them wrapped in wave plates make the order-1 and order-2 CNOTs.
o1 = el.o1_cnot(space, "A")
for l in (-1, 0, 1, 2):
    show(f"order-1 CNOT on |H,{l:+d}>:",
         apply_to_single_photon(o1, SinglePhotonState.from_terms(
             space, {Mode("A", "H", l): 1.0})))

print("\nDescriptors round-trip through the netlist grammar:")
spec = el.parse_descriptor("QWP(angle=0.785398) @ A")
print(" parsed:", spec, "\n serialized:", spec.descriptor())
