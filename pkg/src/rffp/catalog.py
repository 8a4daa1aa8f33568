"""
Built-in synthetic device catalogues.

``uas_specs`` covers the six identification leaves under the ``UAS`` root:
two controllers (fast hoppers that differ only in band) and two airframe
models (single carriers that differ in band) in two flight modes each
(different AM depths). ``recognized_specs`` lists four low-band
"commonplace" emitters used to train the detector.
"""
import json

from .errors import InvalidInputError
from .signal import DeviceSpec

UAS_EDGES = (
    ("UAS", "Controller"),
    ("UAS", "UAV"),
    ("Controller", "CtrlA"),
    ("Controller", "CtrlB"),
    ("UAV", "ModelA"),
    ("UAV", "ModelB"),
    ("ModelA", "ModelA-Hover"),
    ("ModelA", "ModelA-Fly"),
    ("ModelB", "ModelB-Hover"),
    ("ModelB", "ModelB-Fly"),
)

# a deeper reference identification tree: six multi-child parents
REFERENCE_UAS_EDGES = (
    ("UAS", "UAVController"),
    ("UAS", "UAV"),
    ("UAVController", "Phantom4-Ctrl"),
    ("UAVController", "Inspire-Ctrl"),
    ("UAVController", "Matrice600-Ctrl"),
    ("UAVController", "MavicPro-Ctrl"),
    ("UAVController", "Beebeerun-Ctrl"),
    ("UAVController", "Iris-Ctrl"),
    ("UAV", "Phantom4"),
    ("UAV", "Inspire"),
    ("UAV", "Matrice600"),
    ("UAV", "MavicPro"),
    ("Phantom4", "Phantom4-Flying"),
    ("Phantom4", "Phantom4-Hovering"),
    ("Phantom4", "Phantom4-Videoing"),
    ("Inspire", "Inspire-Flying"),
    ("Inspire", "Inspire-Hovering"),
    ("Inspire", "Inspire-Videoing"),
    ("MavicPro", "MavicPro-Flying"),
    ("MavicPro", "MavicPro-Hovering"),
    ("MavicPro", "MavicPro-Videoing"),
)


def uas_specs():
    ctrl = dict(hop_period=192, ramp_length=160, amplitude=1.0, amp_jitter=0.05, freq_jitter=0.01)
    uav = dict(hop_period=1 << 20, ramp_length=160, amplitude=0.5, am_freq=0.01,
               amp_jitter=0.05, freq_jitter=0.01)
    return [
        DeviceSpec(("UAS", "Controller", "CtrlA"), (0.16, 0.205, 0.245), **ctrl),
        DeviceSpec(("UAS", "Controller", "CtrlB"), (0.29, 0.34, 0.39), **ctrl),
        DeviceSpec(("UAS", "UAV", "ModelA", "ModelA-Hover"), (0.19,), am_depth=0.2, **uav),
        DeviceSpec(("UAS", "UAV", "ModelA", "ModelA-Fly"), (0.19,), am_depth=0.28, **uav),
        DeviceSpec(("UAS", "UAV", "ModelB", "ModelB-Hover"), (0.33,), am_depth=0.2, **uav),
        DeviceSpec(("UAS", "UAV", "ModelB", "ModelB-Fly"), (0.33,), am_depth=0.28, **uav),
    ]


def recognized_specs():
    common = dict(hop_period=1 << 20, ramp_length=96, amp_jitter=0.03, freq_jitter=0.005)
    return [
        DeviceSpec(("Recognized", "Bluetooth", "BT-A"), (0.031,), amplitude=0.9, **common),
        DeviceSpec(("Recognized", "Bluetooth", "BT-B"), (0.043,), amplitude=0.7, am_depth=0.15,
                   am_freq=0.005, **common),
        DeviceSpec(("Recognized", "WiFi", "WiFi-A"), (0.058,), amplitude=1.0, **common),
        DeviceSpec(("Recognized", "WiFi", "WiFi-B"), (0.074,), amplitude=0.8, am_depth=0.1,
                   am_freq=0.004, **common),
    ]


BUILTIN = {
    "uas": uas_specs,
    "recognized": recognized_specs,
    "all": lambda: recognized_specs() + uas_specs(),
}


def spec_to_dict(spec):
    return {
        "class_path": list(spec.class_path),
        "carrier_bins": list(spec.carrier_bins),
        "hop_period": spec.hop_period,
        "ramp_length": spec.ramp_length,
        "amplitude": spec.amplitude,
        "am_depth": spec.am_depth,
        "am_freq": spec.am_freq,
        "amp_jitter": spec.amp_jitter,
        "freq_jitter": spec.freq_jitter,
    }


def spec_from_dict(d):
    try:
        return DeviceSpec(**d)
    except TypeError as exc:
        raise InvalidInputError(f"bad device spec {d!r}: {exc}") from None


def specs_for_tree(tree, amplitude_step=0.35):
    """Derive one device spec per leaf of an arbitrary label tree.

    The level-1 branch fixes amplitude and hop rate, each deeper level moves
    the carrier band, and the leaf's rank among its siblings sets the AM
    depth. Deterministic in the tree structure and child order.
    """
    specs = []
    for leaf in tree.leaves():
        path = tree.path_to(leaf)
        ranks = [tree.children(tree.parent(node)).index(node) for node in path]
        amp = 1.0 / (1.0 + amplitude_step * ranks[0])
        base = 0.05 + 0.3 * (ranks[1] + 1) / (len(tree.children(path[0])) + 1) if len(path) > 1 else 0.2
        hops = 1 << 20 if ranks[0] % 2 else 192
        carriers = (base,) if hops > 4096 else (base, min(base * 1.15, 0.45), min(base * 1.3, 0.47))
        am = 0.1 + 0.15 * ranks[-1] if len(path) > 2 else 0.0
        specs.append(DeviceSpec((tree.root,) + tuple(path), carriers, hop_period=hops,
                                ramp_length=160, amplitude=amp, am_depth=min(am, 0.9),
                                am_freq=0.01, amp_jitter=0.05, freq_jitter=0.01))
    return specs


def load_catalog(source, tree_loader=None):
    """Resolve ``builtin:<name>``, a JSON catalogue, or a tree file to specs."""
    if source.startswith("builtin:"):
        name = source.split(":", 1)[1]
        if name not in BUILTIN:
            raise InvalidInputError(f"unknown builtin catalogue {name!r}; choose from {sorted(BUILTIN)}")
        return BUILTIN[name]()
    if source.endswith(".json"):
        with open(source, encoding="utf-8") as fh:
            doc = json.load(fh)
        return [spec_from_dict(d) for d in doc.get("devices", doc)]
    if tree_loader is None:
        from .hierarchy import read_tree as tree_loader
    return specs_for_tree(tree_loader(source))
