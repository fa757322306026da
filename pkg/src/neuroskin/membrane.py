"""Neuro-membrane model: a rectangular mesh of square plane-stress elements,
each carrying a neuron that turns nodal horizontal motion into a traction
force fed back onto its own four nodes.

Node numbering convention (documented contract): nodes are numbered 1-based,
row-major, with rows running parallel to the x axis (the long, ``nx * size``
dimension). Node number ``1 + ix + iy * (nx + 1)`` sits at coordinates
``(ix * size, iy * size)``. Elements are indexed 0-based in row-major order
(element ``iy * nx + ix`` covers the cell with lower-left node ``(ix, iy)``).
Connectivity arrays hold 0-based node indices (node number minus one).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ModelError

SUPPORT_EDGES = ("left", "right", "bottom", "top")


class ActivationKind(enum.Enum):
    """Activation families; every kind maps R -> [-1, +1], is non-decreasing
    and passes through the origin."""

    SYMMETRIC_SIGMOID = "symmetric_sigmoid"  # tanh-shaped
    LINEAR_SATURATING = "linear_saturating"  # identity clamped to [-1, 1]
    ZERO = "zero"                            # neuron disabled


def activation_eval(kind: ActivationKind, z: float) -> float:
    """Evaluate an activation at potential ``z``. Output lies in [-1, +1]."""
    if not math.isfinite(z):
        raise ModelError(f"activation input must be finite, got {z!r}")
    if kind is ActivationKind.SYMMETRIC_SIGMOID:
        return math.tanh(z)
    if kind is ActivationKind.LINEAR_SATURATING:
        return min(1.0, max(-1.0, z))
    if kind is ActivationKind.ZERO:
        return 0.0
    raise ModelError(f"unknown activation kind: {kind!r}")


@dataclass(frozen=True)
class Neuron:
    """One neuron: four input weights (one per element node, applied to the
    node's horizontal displacement), an activation, and an output weight
    ``output_weight`` in stress units (MPa)."""

    input_weights: tuple[float, float, float, float]
    activation: ActivationKind = ActivationKind.SYMMETRIC_SIGMOID
    output_weight: float = 1.0

    def __post_init__(self):
        if len(self.input_weights) != 4:
            raise ModelError("a neuron has exactly 4 input weights")
        object.__setattr__(self, "input_weights", tuple(float(w) for w in self.input_weights))


def neuron_potential(neuron: Neuron, u_horizontal) -> float:
    """Potential z = sum of input weights times the four nodal horizontal
    displacements."""
    u = np.asarray(u_horizontal, dtype=float)
    if u.shape != (4,):
        raise ModelError(f"expected 4 horizontal displacements, got shape {u.shape}")
    if not np.all(np.isfinite(u)):
        raise ModelError("nodal displacements must be finite")
    return float(np.dot(neuron.input_weights, u))


@dataclass(frozen=True, eq=False)
class Mesh:
    """Rectangular mesh of axis-aligned square elements.

    ``coords`` is ``(n_nodes, 2)`` in mm, ``elements`` is ``(n_elements, 4)``
    with 0-based node indices in counterclockwise order. ``supported_nodes``
    and ``output_node`` use 1-based node numbers (see module docstring).
    """

    nx: int
    ny: int
    size: float
    coords: np.ndarray = field(repr=False)
    elements: np.ndarray = field(repr=False)
    supported_nodes: tuple[int, ...]
    output_node: int

    def __post_init__(self):
        n_nodes = (self.nx + 1) * (self.ny + 1)
        if self.coords.shape != (n_nodes, 2):
            raise ModelError(f"coords must be ({n_nodes}, 2), got {self.coords.shape}")
        if self.elements.shape != (self.nx * self.ny, 4):
            raise ModelError("element connectivity has wrong shape")
        if not (1 <= self.output_node <= n_nodes):
            raise ModelError(
                f"output node {self.output_node} out of range 1..{n_nodes}"
            )
        for node in self.supported_nodes:
            if not (1 <= node <= n_nodes):
                raise ModelError(f"supported node {node} out of range 1..{n_nodes}")
        self.coords.setflags(write=False)
        self.elements.setflags(write=False)

    @property
    def n_nodes(self) -> int:
        return (self.nx + 1) * (self.ny + 1)

    @property
    def n_elements(self) -> int:
        return self.nx * self.ny

    @property
    def element_area(self) -> float:
        return self.size * self.size

    @property
    def supported_indices(self) -> np.ndarray:
        """0-based indices of the supported nodes, ascending."""
        return np.asarray(sorted(self.supported_nodes), dtype=int) - 1

    @property
    def output_index(self) -> int:
        """0-based index of the output node."""
        return self.output_node - 1


@dataclass(frozen=True, eq=False)
class MaterialField:
    """Per-element elastic modulus plus shared plane-stress constants.

    Consistent unit set: mm, N, MPa, tonne/mm^3.
    """

    elastic_modulus: np.ndarray   # (n_elements,) MPa
    poisson: float
    density: float                # tonne/mm^3
    thickness: float              # mm

    def __post_init__(self):
        mod = np.asarray(self.elastic_modulus, dtype=float)
        object.__setattr__(self, "elastic_modulus", mod)
        if mod.ndim != 1 or not np.all(mod > 0.0):
            raise ModelError("elastic modulus must be a 1-D array of positive values")
        if not (0.0 <= self.poisson < 0.5):
            raise ModelError(f"Poisson ratio must lie in [0, 0.5), got {self.poisson}")
        if self.density <= 0.0:
            raise ModelError("density must be positive")
        if self.thickness <= 0.0:
            raise ModelError("thickness must be positive")
        mod.setflags(write=False)


@dataclass(frozen=True, eq=False)
class MembraneModel:
    """Immutable bundle of mesh, one neuron per element, and material field.

    Safe to share across concurrent evaluations.
    """

    mesh: Mesh
    neurons: tuple[Neuron, ...]
    material: MaterialField

    def __post_init__(self):
        if len(self.neurons) != self.mesh.n_elements:
            raise ModelError(
                f"need one neuron per element: {len(self.neurons)} neurons for "
                f"{self.mesh.n_elements} elements"
            )
        if len(self.material.elastic_modulus) != self.mesh.n_elements:
            raise ModelError("material field length must equal the element count")


def _edge_node_indices(nx: int, ny: int, edge: str) -> np.ndarray:
    row = nx + 1
    if edge == "left":
        return np.arange(ny + 1) * row
    if edge == "right":
        return np.arange(ny + 1) * row + nx
    if edge == "bottom":
        return np.arange(nx + 1)
    if edge == "top":
        return np.arange(nx + 1) + ny * row
    raise ModelError(f"support edge must be one of {SUPPORT_EDGES}, got {edge!r}")


def _default_output_index(nx: int, ny: int, support_edge: str) -> int:
    """Midpoint node of the edge opposite the supports.

    For the 20x10 / left-supported mesh this lands on node number 126.
    """
    row = nx + 1
    if support_edge == "left":
        return (ny // 2) * row + nx
    if support_edge == "right":
        return (ny // 2) * row
    if support_edge == "bottom":
        return ny * row + nx // 2
    return nx // 2  # top


def build_membrane(
    nx: int,
    ny: int,
    size: float,
    support_edge: str = "left",
    output_node: int | None = None,
    *,
    neuron_input_weight: float = 0.25,
    neuron_output_weight: float = 10.0,
    activation: ActivationKind = ActivationKind.SYMMETRIC_SIGMOID,
    elastic_modulus: float = 500000.0,
    poisson: float = 0.2,
    density: float = 1.0e-4,
    thickness: float = 10.0,
) -> MembraneModel:
    """Build a rectangular neuro-membrane of ``nx`` by ``ny`` square elements
    of edge ``size`` (mm), supported along one edge.

    All elements get identical default neurons (equal input weights on the
    four nodes) and a uniform elastic modulus; both are meant to be replaced
    by identification parameters later. ``output_node`` is a 1-based node
    number; by default the midpoint of the edge opposite the supports.
    """
    if nx < 1 or ny < 1:
        raise ModelError(f"mesh needs at least 1x1 elements, got {nx}x{ny}")
    if size <= 0.0:
        raise ModelError(f"element size must be positive, got {size}")
    if support_edge not in SUPPORT_EDGES:
        raise ModelError(f"support edge must be one of {SUPPORT_EDGES}, got {support_edge!r}")

    row = nx + 1
    ix, iy = np.meshgrid(np.arange(nx + 1), np.arange(ny + 1))
    coords = np.column_stack([ix.ravel() * float(size), iy.ravel() * float(size)])

    ex, ey = np.meshgrid(np.arange(nx), np.arange(ny))
    n1 = ey.ravel() * row + ex.ravel()
    elements = np.column_stack([n1, n1 + 1, n1 + row + 1, n1 + row]).astype(int)

    supported = _edge_node_indices(nx, ny, support_edge)
    if output_node is None:
        out_idx = _default_output_index(nx, ny, support_edge)
    else:
        out_idx = int(output_node) - 1
        if not (0 <= out_idx < (nx + 1) * (ny + 1)):
            raise ModelError(
                f"output node {output_node} out of range 1..{(nx + 1) * (ny + 1)}"
            )

    mesh = Mesh(
        nx=nx,
        ny=ny,
        size=float(size),
        coords=coords,
        elements=elements,
        supported_nodes=tuple(int(i) + 1 for i in supported),
        output_node=out_idx + 1,
    )
    w = float(neuron_input_weight)
    neurons = tuple(
        Neuron((w, w, w, w), activation, float(neuron_output_weight))
        for _ in range(mesh.n_elements)
    )
    material = MaterialField(
        elastic_modulus=np.full(mesh.n_elements, float(elastic_modulus)),
        poisson=poisson,
        density=density,
        thickness=thickness,
    )
    return MembraneModel(mesh=mesh, neurons=neurons, material=material)


def element_traction_forces(model: MembraneModel, element: int, u_horizontal) -> np.ndarray:
    """Horizontal nodal forces produced by one element's neuron.

    The neuron output is scaled by its output weight and the element area,
    and the resulting traction force is split equally over the element's
    four nodes.
    """
    if not (0 <= element < model.mesh.n_elements):
        raise ModelError(
            f"element index {element} out of range 0..{model.mesh.n_elements - 1}"
        )
    neuron = model.neurons[element]
    z = neuron_potential(neuron, u_horizontal)
    per_node = (
        activation_eval(neuron.activation, z)
        * neuron.output_weight
        * model.mesh.element_area
        / 4.0
    )
    return np.full(4, per_node)
