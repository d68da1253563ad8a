"""Kinematic model containers and URDF I/O.

Only the slice of URDF that a fixed-base serial manipulator needs is
supported: revolute, continuous and fixed joints, one inertial block per
link. Everything else (prismatic/planar/floating joints, xacro macros)
is rejected loudly rather than silently mis-simulated. Visual, collision
and mesh elements are ignored with a diagnostic on stderr.

Conventions: SI units, right-handed frames, each link frame sits at its
parent joint. Gravity defaults to (0, 0, -9.81) and can be overridden
per model.
"""

from __future__ import annotations

import io
import logging
import math
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field, replace

import numpy as np

log = logging.getLogger(__name__)

DEFAULT_GRAVITY = (0.0, 0.0, -9.81)

ACTUATED_KINDS = ("revolute", "continuous")
SUPPORTED_KINDS = ACTUATED_KINDS + ("fixed",)
UNSUPPORTED_KINDS = ("prismatic", "planar", "floating")


class ModelError(Exception):
    """Base class for model construction and parsing failures."""


class UrdfParseError(ModelError):
    pass


class UnsupportedJointError(ModelError):
    pass


class TopologyError(ModelError):
    pass


class ValidationError(ModelError):
    pass


class UnknownFrameError(ModelError):
    pass


def _as_vec3(value, name):
    arr = np.asarray(value, dtype=float).reshape(-1)
    if arr.shape != (3,):
        raise ValidationError(f"{name} must be a 3-vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} contains non-finite values: {arr}")
    return arr


def rpy_to_matrix(rpy):
    """Rotation matrix for URDF fixed-axis roll/pitch/yaw: Rz(y) @ Ry(p) @ Rx(r)."""
    r, p, y = float(rpy[0]), float(rpy[1]), float(rpy[2])
    cr, sr = math.cos(r), math.sin(r)
    cp, sp = math.cos(p), math.sin(p)
    cy, sy = math.cos(y), math.sin(y)
    return np.array([
        [cy * cp, cy * sp * sr - sy * cr, cy * sp * cr + sy * sr],
        [sy * cp, sy * sp * sr + cy * cr, sy * sp * cr - cy * sr],
        [-sp, cp * sr, cp * cr],
    ])


@dataclass(frozen=True)
class Link:
    """Rigid body: mass, center of mass and rotational inertia about the COM,
    all expressed in the link's own frame."""

    name: str
    mass: float
    center_of_mass: np.ndarray
    inertia: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "center_of_mass", _as_vec3(self.center_of_mass, f"link '{self.name}' center_of_mass"))
        inertia = np.asarray(self.inertia, dtype=float)
        if inertia.shape != (3, 3):
            raise ValidationError(f"link '{self.name}' inertia must be 3x3, got {inertia.shape}")
        object.__setattr__(self, "inertia", inertia)
        object.__setattr__(self, "mass", float(self.mass))
        _validate_inertial(self)


@dataclass(frozen=True)
class Joint:
    """Connection between two links. `axis` is a unit vector in the child
    frame; `origin_xyz`/`origin_rpy` place the child frame in the parent
    frame before the joint rotation is applied."""

    name: str
    kind: str
    parent: str
    child: str
    origin_xyz: np.ndarray = (0.0, 0.0, 0.0)
    origin_rpy: np.ndarray = (0.0, 0.0, 0.0)
    axis: np.ndarray = (1.0, 0.0, 0.0)
    lower: float = -math.inf
    upper: float = math.inf
    effort: float | None = None
    viscous_friction: float = 0.0

    def __post_init__(self):
        if self.kind in UNSUPPORTED_KINDS or self.kind not in SUPPORTED_KINDS:
            raise UnsupportedJointError(
                f"joint '{self.name}' has unsupported type '{self.kind}'; "
                f"supported types are {', '.join(SUPPORTED_KINDS)}"
            )
        object.__setattr__(self, "origin_xyz", _as_vec3(self.origin_xyz, f"joint '{self.name}' origin xyz"))
        object.__setattr__(self, "origin_rpy", _as_vec3(self.origin_rpy, f"joint '{self.name}' origin rpy"))
        axis = _as_vec3(self.axis, f"joint '{self.name}' axis")
        if self.kind != "fixed":
            norm = float(np.linalg.norm(axis))
            if norm < 1e-9:
                raise ValidationError(f"joint '{self.name}' has a zero axis")
            if abs(norm - 1.0) > 1e-6:
                raise ValidationError(
                    f"joint '{self.name}' axis has norm {norm:.9f}, expected a unit vector"
                )
            axis = axis / norm
        object.__setattr__(self, "axis", axis)
        object.__setattr__(self, "lower", float(self.lower))
        object.__setattr__(self, "upper", float(self.upper))
        if self.lower > self.upper:
            raise ValidationError(f"joint '{self.name}' has lower > upper limit")
        if self.effort is not None:
            object.__setattr__(self, "effort", float(self.effort))
            if self.effort <= 0:
                raise ValidationError(f"joint '{self.name}' effort limit must be positive")
        object.__setattr__(self, "viscous_friction", float(self.viscous_friction))
        if self.viscous_friction < 0:
            raise ValidationError(f"joint '{self.name}' viscous friction must be >= 0")

    @property
    def actuated(self):
        return self.kind in ACTUATED_KINDS

    def origin_rotation(self):
        return rpy_to_matrix(self.origin_rpy)


def _validate_inertial(link: Link):
    if link.mass < 0:
        raise ValidationError(f"link '{link.name}' has negative mass {link.mass}")
    if not np.isfinite(link.mass):
        raise ValidationError(f"link '{link.name}' has non-finite mass")
    inertia = link.inertia
    if not np.all(np.isfinite(inertia)):
        raise ValidationError(f"link '{link.name}' inertia contains non-finite values")
    if not np.allclose(inertia, inertia.T, atol=1e-12):
        raise ValidationError(f"link '{link.name}' inertia tensor is not symmetric")
    eig = np.linalg.eigvalsh(0.5 * (inertia + inertia.T))
    tol = 1e-12 * max(1.0, float(np.abs(inertia).max()))
    if eig[0] < -tol:
        raise ValidationError(
            f"link '{link.name}' inertia tensor is not positive semi-definite (eigenvalues {eig})"
        )
    if link.mass > 0:
        # principal moments of a real rigid body obey the triangle inequalities
        a, b, c = np.clip(eig, 0.0, None)
        slack = 1e-9 * max(1.0, c)
        if a + b + slack < c or a + c + slack < b or b + c + slack < a:
            raise ValidationError(
                f"link '{link.name}' principal moments {eig} violate the triangle inequality"
            )


@dataclass
class KinematicModel:
    """An ordered set of links and joints, base first.

    For simulation the joints must form a single serial chain; trees are
    representable so that a chain can be extracted from a full robot
    description, but dynamics operations refuse them.
    """

    name: str
    links: tuple
    joints: tuple
    gravity: np.ndarray = DEFAULT_GRAVITY

    def __post_init__(self):
        self.links = tuple(self.links)
        self.joints = tuple(self.joints)
        self.gravity = _as_vec3(self.gravity, "gravity")
        self._link_index = {}
        for i, link in enumerate(self.links):
            if link.name in self._link_index:
                raise ValidationError(f"duplicate link name '{link.name}'")
            self._link_index[link.name] = i
        self._joint_index = {}
        seen_children = set()
        for i, joint in enumerate(self.joints):
            if joint.name in self._joint_index:
                raise ValidationError(f"duplicate joint name '{joint.name}'")
            self._joint_index[joint.name] = i
            if joint.parent not in self._link_index:
                raise TopologyError(f"joint '{joint.name}' references unknown parent link '{joint.parent}'")
            if joint.child not in self._link_index:
                raise TopologyError(f"joint '{joint.name}' references unknown child link '{joint.child}'")
            if joint.child in seen_children:
                raise TopologyError(f"link '{joint.child}' has more than one parent joint")
            seen_children.add(joint.child)
            # base-to-tip ordering: parents must already be connected (or be the root)
            if self._link_index[joint.parent] >= self._link_index[joint.child]:
                raise TopologyError(
                    f"joint '{joint.name}': parent link '{joint.parent}' must precede child '{joint.child}'"
                )
        roots = [l.name for l in self.links if l.name not in seen_children]
        if len(self.links) and len(roots) != 1:
            raise TopologyError(f"expected exactly one root link, found {roots}")
        if len(self.joints) != max(len(self.links) - 1, 0):
            raise TopologyError(
                f"{len(self.links)} links need {max(len(self.links) - 1, 0)} joints to form a tree, "
                f"got {len(self.joints)}"
            )
        self._root = roots[0] if roots else None
        self._children = {l.name: [] for l in self.links}
        for joint in self.joints:
            self._children[joint.parent].append(joint.name)
        self._packed = None  # caches the array form used by the dynamics kernels

    # -- lookups ---------------------------------------------------------

    @property
    def root(self):
        return self._root

    @property
    def dof(self) -> int:
        return sum(1 for j in self.joints if j.actuated)

    def link(self, name) -> Link:
        try:
            return self.links[self._link_index[name]]
        except KeyError:
            raise UnknownFrameError(f"model '{self.name}' has no link '{name}'") from None

    def joint(self, name) -> Joint:
        try:
            return self.joints[self._joint_index[name]]
        except KeyError:
            raise UnknownFrameError(f"model '{self.name}' has no joint '{name}'") from None

    def has_link(self, name) -> bool:
        return name in self._link_index

    def child_joints(self, link_name):
        if link_name not in self._children:
            raise UnknownFrameError(f"model '{self.name}' has no link '{link_name}'")
        return tuple(self._children[link_name])

    def parent_joint(self, link_name) -> Joint | None:
        for joint in self.joints:
            if joint.child == link_name:
                return joint
        if link_name not in self._link_index:
            raise UnknownFrameError(f"model '{self.name}' has no link '{link_name}'")
        return None

    @property
    def actuated_joints(self):
        return tuple(j for j in self.joints if j.actuated)

    @property
    def is_serial_chain(self) -> bool:
        return all(len(kids) <= 1 for kids in self._children.values())

    def require_serial_chain(self):
        for name, kids in self._children.items():
            if len(kids) > 1:
                raise TopologyError(
                    f"model '{self.name}' is not a serial chain: link '{name}' has "
                    f"{len(kids)} child joints ({', '.join(kids)}); extract a chain first"
                )

    # -- derived models --------------------------------------------------

    def with_gravity(self, gravity) -> "KinematicModel":
        return KinematicModel(self.name, self.links, self.joints, gravity)

    def replace_link(self, link: Link) -> "KinematicModel":
        links = tuple(link if l.name == link.name else l for l in self.links)
        if link.name not in self._link_index:
            raise UnknownFrameError(f"model '{self.name}' has no link '{link.name}'")
        return KinematicModel(self.name, links, self.joints, self.gravity)


def outbound_direction(model: KinematicModel, frame: str) -> np.ndarray:
    """Unit vector, in `frame` coordinates, pointing from the frame origin
    out toward the chain tip: the first child joint's origin direction, or
    the link's own COM direction when the link is the tip.

    This single convention is shared by payload attachment (where the grasped
    mass physically sits) and by the mass estimator (where it assumes the
    mass sits), so the two always agree on geometry.
    """
    kids = model.child_joints(frame)
    if kids:
        v = np.asarray(model.joint(kids[0]).origin_xyz, dtype=float)
        n = float(np.linalg.norm(v))
        if n > 1e-12:
            return v / n
    com = np.asarray(model.link(frame).center_of_mass, dtype=float)
    n = float(np.linalg.norm(com))
    if n > 1e-12:
        return com / n
    raise ValidationError(
        f"cannot infer an outbound direction on link {frame!r}: no child joint "
        "offset and the link COM sits at the frame origin; give the link a "
        "nonzero COM or pick a different frame"
    )


def scale_inertial(model: KinematicModel, factor: float) -> KinematicModel:
    """Scale every link mass and inertia tensor by `factor` (COMs untouched).

    This is how an observer-side model with deliberately wrong parameters is
    built; gravity and geometry are preserved so the error is purely inertial.
    """
    factor = float(factor)
    if not (factor > 0 and np.isfinite(factor)):
        raise ValidationError(f"inertial scale must be positive and finite, got {factor}")
    links = tuple(
        Link(l.name, l.mass * factor, l.center_of_mass.copy(), l.inertia * factor)
        for l in model.links
    )
    return KinematicModel(model.name, links, model.joints, model.gravity)


# -- URDF parsing ---------------------------------------------------------


def _float_attr(elem, attr, default=None, *, ctx=""):
    raw = elem.get(attr)
    if raw is None:
        if default is None:
            raise UrdfParseError(f"missing attribute '{attr}' on <{elem.tag}> {ctx}".strip())
        return default
    try:
        return float(raw)
    except ValueError:
        raise UrdfParseError(f"attribute '{attr}'='{raw}' on <{elem.tag}> {ctx} is not a number") from None


def _vec_attr(elem, attr, default):
    raw = elem.get(attr)
    if raw is None:
        return np.array(default, dtype=float)
    parts = raw.split()
    if len(parts) != 3:
        raise UrdfParseError(f"attribute '{attr}'='{raw}' on <{elem.tag}> must have three numbers")
    try:
        return np.array([float(p) for p in parts])
    except ValueError:
        raise UrdfParseError(f"attribute '{attr}'='{raw}' on <{elem.tag}> is not numeric") from None


def _parse_link(elem) -> Link:
    name = elem.get("name")
    if not name:
        raise UrdfParseError("<link> element without a name")
    inertial = elem.find("inertial")
    if inertial is None:
        raise ValidationError(f"link '{name}' has no <inertial> element; every link needs one")
    mass_el = inertial.find("mass")
    if mass_el is None:
        raise ValidationError(f"link '{name}' inertial block has no <mass>")
    mass = _float_attr(mass_el, "value", ctx=f"(link '{name}')")
    inertia_el = inertial.find("inertia")
    if inertia_el is None:
        raise ValidationError(f"link '{name}' inertial block has no <inertia>")
    vals = {k: _float_attr(inertia_el, k, ctx=f"(link '{name}')")
            for k in ("ixx", "ixy", "ixz", "iyy", "iyz", "izz")}
    inertia = np.array([
        [vals["ixx"], vals["ixy"], vals["ixz"]],
        [vals["ixy"], vals["iyy"], vals["iyz"]],
        [vals["ixz"], vals["iyz"], vals["izz"]],
    ])
    origin = inertial.find("origin")
    com = np.zeros(3)
    if origin is not None:
        com = _vec_attr(origin, "xyz", (0.0, 0.0, 0.0))
        rpy = _vec_attr(origin, "rpy", (0.0, 0.0, 0.0))
        if np.any(rpy != 0.0):
            # rotate the tensor into the link frame so downstream code never
            # needs to carry a COM orientation around
            R = rpy_to_matrix(rpy)
            inertia = R @ inertia @ R.T
    return Link(name, mass, com, inertia)


def _parse_joint(elem) -> Joint:
    name = elem.get("name")
    if not name:
        raise UrdfParseError("<joint> element without a name")
    kind = elem.get("type")
    if kind is None:
        raise UrdfParseError(f"joint '{name}' has no type attribute")
    parent_el = elem.find("parent")
    child_el = elem.find("child")
    if parent_el is None or child_el is None or not parent_el.get("link") or not child_el.get("link"):
        raise UrdfParseError(f"joint '{name}' needs <parent link=...> and <child link=...>")
    origin = elem.find("origin")
    xyz = _vec_attr(origin, "xyz", (0.0, 0.0, 0.0)) if origin is not None else np.zeros(3)
    rpy = _vec_attr(origin, "rpy", (0.0, 0.0, 0.0)) if origin is not None else np.zeros(3)
    axis_el = elem.find("axis")
    axis = _vec_attr(axis_el, "xyz", (1.0, 0.0, 0.0)) if axis_el is not None else np.array([1.0, 0.0, 0.0])
    lower, upper, effort = -math.inf, math.inf, None
    limit = elem.find("limit")
    if limit is not None:
        lower = _float_attr(limit, "lower", -math.inf)
        upper = _float_attr(limit, "upper", math.inf)
        if limit.get("effort") is not None:
            effort = _float_attr(limit, "effort")
    damping = 0.0
    dyn = elem.find("dynamics")
    if dyn is not None:
        damping = _float_attr(dyn, "damping", 0.0)
    return Joint(
        name=name, kind=kind, parent=parent_el.get("link"), child=child_el.get("link"),
        origin_xyz=xyz, origin_rpy=rpy, axis=axis, lower=lower, upper=upper,
        effort=effort, viscous_friction=damping,
    )


_IGNORED_TAGS = ("visual", "collision", "mesh", "gazebo", "transmission", "material")


def parse_urdf(text: str, *, require_chain: bool = True) -> KinematicModel:
    """Parse a URDF document into a KinematicModel.

    require_chain=True (the default) rejects branching kinematics with a
    topology error; pass False when the document describes a full robot
    from which extract_chain() will isolate one arm.
    """
    if "xacro" in text and ("<xacro:" in text or "xmlns:xacro" in text or "$(" in text):
        raise UrdfParseError(
            "document contains xacro macros; expand it with the xacro preprocessor first"
        )
    try:
        root = ET.fromstring(text)
    except ET.ParseError as exc:
        line, col = getattr(exc, "position", (None, None))
        where = f" at line {line}, column {col}" if line is not None else ""
        raise UrdfParseError(f"malformed XML{where}: {exc.msg if hasattr(exc, 'msg') else exc}") from None
    if root.tag != "robot":
        raise UrdfParseError(f"expected a <robot> document, got <{root.tag}>")
    name = root.get("name") or "robot"

    ignored = 0
    for tag in _IGNORED_TAGS:
        ignored += sum(1 for _ in root.iter(tag))
    if ignored:
        log.warning("parse_urdf(%s): ignoring %d visual/collision/mesh-style elements", name, ignored)

    raw_links = [_parse_link(e) for e in root.findall("link")]
    raw_joints = [_parse_joint(e) for e in root.findall("joint")]
    if not raw_links:
        raise UrdfParseError("document defines no links")

    # reorder base-to-tip: breadth-first from the root, children in declaration order
    by_child = {}
    for j in raw_joints:
        if j.child in by_child:
            raise TopologyError(f"link '{j.child}' has more than one parent joint")
        by_child[j.child] = j
    link_names = {l.name for l in raw_links}
    for j in raw_joints:
        for end in (j.parent, j.child):
            if end not in link_names:
                raise TopologyError(f"joint '{j.name}' references unknown link '{end}'")
    roots = [l.name for l in raw_links if l.name not in by_child]
    if len(roots) != 1:
        raise TopologyError(f"expected exactly one root link, found {sorted(roots)}")

    children = {l.name: [] for l in raw_links}
    for j in raw_joints:
        children[j.parent].append(j)
    order = []
    stack = [roots[0]]
    while stack:
        cur = stack.pop(0)
        order.append(cur)
        stack.extend(j.child for j in children[cur])
    if len(order) != len(raw_links):
        orphans = sorted(link_names - set(order))
        raise TopologyError(f"links not connected to the root: {orphans}")

    link_by_name = {l.name: l for l in raw_links}
    links = tuple(link_by_name[n] for n in order)
    joints = tuple(by_child[n] for n in order[1:])
    model = KinematicModel(name, links, joints, DEFAULT_GRAVITY)
    if require_chain:
        model.require_serial_chain()
    return model


def parse_urdf_file(path, *, require_chain: bool = True) -> KinematicModel:
    with io.open(path, "r", encoding="utf-8") as f:
        return parse_urdf(f.read(), require_chain=require_chain)


def extract_chain(model: KinematicModel, base_link: str, tip_link: str) -> KinematicModel:
    """Isolate the serial chain from base_link down to tip_link.

    tip_link must be a descendant of base_link (the path is unique in a
    tree). Inertial data, limits and friction are carried over unchanged;
    the result is re-rooted at base_link. Idempotent.
    """
    for name in (base_link, tip_link):
        if not model.has_link(name):
            raise UnknownFrameError(f"model '{model.name}' has no link '{name}'")
    path_joints = []
    cur = tip_link
    while cur != base_link:
        pj = model.parent_joint(cur)
        if pj is None:
            raise TopologyError(
                f"no base-to-tip path: '{base_link}' is not an ancestor of '{tip_link}'"
            )
        path_joints.append(pj)
        cur = pj.parent
    path_joints.reverse()
    link_names = [base_link] + [j.child for j in path_joints]
    links = tuple(model.link(n) for n in link_names)
    return KinematicModel(model.name, links, tuple(path_joints), model.gravity)


# -- serialization --------------------------------------------------------


def _fmt(x: float) -> str:
    return repr(float(x))


def _fmt_vec(v) -> str:
    return " ".join(_fmt(x) for x in v)


def serialize_urdf(model: KinematicModel) -> str:
    """Emit the model back as URDF text. Round-trips through parse_urdf
    with every numeric field preserved exactly (repr formatting)."""
    out = [f'<robot name="{model.name}">']
    for link in model.links:
        inertia = link.inertia
        out.append(f'  <link name="{link.name}">')
        out.append("    <inertial>")
        out.append(f'      <origin xyz="{_fmt_vec(link.center_of_mass)}" rpy="0 0 0"/>')
        out.append(f'      <mass value="{_fmt(link.mass)}"/>')
        out.append(
            '      <inertia ixx="{}" ixy="{}" ixz="{}" iyy="{}" iyz="{}" izz="{}"/>'.format(
                _fmt(inertia[0, 0]), _fmt(inertia[0, 1]), _fmt(inertia[0, 2]),
                _fmt(inertia[1, 1]), _fmt(inertia[1, 2]), _fmt(inertia[2, 2]),
            )
        )
        out.append("    </inertial>")
        out.append("  </link>")
    for joint in model.joints:
        out.append(f'  <joint name="{joint.name}" type="{joint.kind}">')
        out.append(f'    <parent link="{joint.parent}"/>')
        out.append(f'    <child link="{joint.child}"/>')
        out.append(f'    <origin xyz="{_fmt_vec(joint.origin_xyz)}" rpy="{_fmt_vec(joint.origin_rpy)}"/>')
        if joint.kind != "fixed":
            out.append(f'    <axis xyz="{_fmt_vec(joint.axis)}"/>')
        has_limits = math.isfinite(joint.lower) or math.isfinite(joint.upper) or joint.effort is not None
        if has_limits:
            attrs = []
            if math.isfinite(joint.lower):
                attrs.append(f'lower="{_fmt(joint.lower)}"')
            if math.isfinite(joint.upper):
                attrs.append(f'upper="{_fmt(joint.upper)}"')
            if joint.effort is not None:
                attrs.append(f'effort="{_fmt(joint.effort)}"')
            out.append(f"    <limit {' '.join(attrs)}/>")
        if joint.viscous_friction != 0.0:
            out.append(f'    <dynamics damping="{_fmt(joint.viscous_friction)}"/>')
        out.append("  </joint>")
    out.append("</robot>")
    return "\n".join(out) + "\n"


def fixture_path(name: str):
    """Absolute path of a bundled description or scenario file."""
    from importlib.resources import files

    root = files("graspmass").joinpath("fixtures")
    p = root.joinpath(name)
    if not p.is_file():
        have = ", ".join(sorted(f.name for f in root.iterdir() if f.is_file()))
        raise FileNotFoundError(f"no bundled fixture {name!r} (have: {have})")
    return str(p)
