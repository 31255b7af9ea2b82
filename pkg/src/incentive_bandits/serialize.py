"""JSON document formats: instances, arrival blocks, menus, experiment configs.

Floats round-trip exactly (shortest-repr JSON encoding). Arm indices inside
documents are 0-based except tie_priority, whose rows are rank permutations of
1..N by construction.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .core import GreedyInstance, IncentiveMode, IncentiveVector
from .greedy_single import Menu, MenuTag
from .instances import (
    AdaptiveArrivals,
    ArrivalProcess,
    BlockSwitching,
    FixedSequence,
    IIDArrivals,
)
from .smooth import (
    SmoothChoiceModel,
    SmoothHardInstanceParams,
    gaussian_greedy_model,
    hard_instance_model,
    logit_model,
)


@dataclass(eq=False)
class InstanceDocument:
    """A loadable experiment subject: greedy instance and/or smooth models."""

    mode: IncentiveMode
    instance: GreedyInstance | None = None
    arrival: ArrivalProcess | None = None
    smooth_rewards: np.ndarray | None = None
    smooth_models: tuple[SmoothChoiceModel, ...] = ()
    generator: dict | None = None

    @property
    def is_smooth(self) -> bool:
        return bool(self.smooth_models)


def arrival_to_doc(arrival: ArrivalProcess) -> dict:
    if isinstance(arrival, FixedSequence):
        doc = {"kind": "fixed", "sequence": list(arrival.sequence), "n_agents": arrival.n_agents}
    elif isinstance(arrival, IIDArrivals):
        doc = {"kind": "iid", "probs": arrival.probs.tolist()}
    elif isinstance(arrival, BlockSwitching):
        doc = {"kind": "block", "schedule": [[a, n] for a, n in arrival.schedule]}
    elif isinstance(arrival, AdaptiveArrivals):
        raise ValueError("adaptive arrival callbacks cannot be serialized")
    else:
        raise ValueError(f"unknown arrival process {type(arrival).__name__}")
    if arrival.seed is not None:
        doc["seed"] = arrival.seed
    return doc


def arrival_from_doc(doc: dict) -> ArrivalProcess:
    kind = doc["kind"]
    seed = doc.get("seed")
    if kind == "fixed":
        return FixedSequence(tuple(doc["sequence"]), n_agents=doc.get("n_agents", 0), seed=seed)
    if kind == "iid":
        return IIDArrivals(np.asarray(doc["probs"], dtype=float), seed=seed)
    if kind == "block":
        return BlockSwitching(tuple((a, n) for a, n in doc["schedule"]), seed=seed)
    raise ValueError(f"unknown arrival kind {kind!r}")


def _smooth_to_doc(rewards: np.ndarray, models) -> dict:
    blocks = []
    for model in models:
        if model.kind == "hard-instance":
            params = getattr(model, "params", None)
            if params is None:
                raise ValueError("hard-instance model lacks construction parameters")
            blocks.append(
                {
                    "kind": "hard",
                    "arm": params.arm,
                    "interval": params.interval,
                    "eps": params.eps,
                    "lipschitz": params.lipschitz,
                    "n_arms": params.n_arms,
                }
            )
        elif model.kind in ("gaussian-greedy", "logit"):
            pref = getattr(model, "preference", None)
            if pref is None:
                raise ValueError(f"{model.kind} model lacks its preference vector")
            block = {
                "kind": model.kind,
                "preference": np.asarray(pref).tolist(),
                "lipschitz": model.lipschitz_constant,
            }
            if model.kind == "logit":
                block["temperature"] = getattr(model, "temperature", 1.0)
            blocks.append(block)
        else:
            raise ValueError(f"cannot serialize smooth model kind {model.kind!r}")
    return {"rewards": rewards.tolist(), "models": blocks}


def _smooth_from_doc(doc: dict):
    rewards = np.asarray(doc["rewards"], dtype=float)
    models = []
    for block in doc["models"]:
        kind = block["kind"]
        if kind == "hard":
            params = SmoothHardInstanceParams(
                arm=block["arm"],
                interval=block["interval"],
                eps=block["eps"],
                lipschitz=block["lipschitz"],
                n_arms=block["n_arms"],
            )
            models.append(hard_instance_model(params))
        elif kind == "gaussian-greedy":
            models.append(gaussian_greedy_model(block["preference"], lipschitz=block["lipschitz"]))
        elif kind == "logit":
            models.append(
                logit_model(
                    block["preference"],
                    temperature=block.get("temperature", 1.0),
                    lipschitz=block["lipschitz"],
                )
            )
        else:
            raise ValueError(f"unknown smooth model kind {kind!r}")
    return rewards, tuple(models)


def document_to_doc(document: InstanceDocument) -> dict:
    doc: dict = {"format": "instance", "mode": document.mode.value}
    if document.instance is not None:
        doc["v"] = document.instance.principal_rewards.tolist()
        doc["mu"] = document.instance.preferences.tolist()
        doc["tie_priority"] = document.instance.tie_priority.tolist()
    if document.arrival is not None:
        doc["arrival"] = arrival_to_doc(document.arrival)
    if document.smooth_models:
        doc["smooth"] = _smooth_to_doc(document.smooth_rewards, document.smooth_models)
    if document.generator:
        doc["generator"] = document.generator
    return doc


def document_from_doc(doc: dict) -> InstanceDocument:
    if doc.get("format") != "instance":
        raise ValueError("not an instance document")
    mode = IncentiveMode(doc["mode"])
    instance = None
    if "v" in doc:
        instance = GreedyInstance(
            np.asarray(doc["v"], dtype=float),
            np.asarray(doc["mu"], dtype=float),
            np.asarray(doc["tie_priority"], dtype=np.int64),
        )
    arrival = arrival_from_doc(doc["arrival"]) if "arrival" in doc else None
    rewards, models = (None, ())
    if "smooth" in doc:
        rewards, models = _smooth_from_doc(doc["smooth"])
    return InstanceDocument(
        mode=mode,
        instance=instance,
        arrival=arrival,
        smooth_rewards=rewards,
        smooth_models=models,
        generator=doc.get("generator"),
    )


def menu_to_doc(menu: Menu) -> dict:
    records = []
    for item, tag in zip(menu.items, menu.tags):
        rec: dict = {}
        if item.mode is IncentiveMode.SINGLE_ARM:
            arm = item.support
            rec["support_arm"] = arm
            rec["value"] = 0.0 if arm is None else float(item.values[arm])
        else:
            rec["values"] = item.values.tolist()
        prov = {}
        if tag.arm is not None:
            prov["arm"] = tag.arm
        if tag.agent is not None:
            prov["agent"] = tag.agent
        if tag.perturbed:
            prov["perturbed"] = True
        if tag.profile is not None:
            prov["profile"] = list(tag.profile)
        rec["provenance"] = prov
        records.append(rec)
    return {"format": "menu", "mode": menu.mode.value, "n_arms": menu.items[0].n_arms if menu.items else 0, "items": records}


def menu_from_doc(doc: dict) -> Menu:
    if doc.get("format") != "menu":
        raise ValueError("not a menu document")
    mode = IncentiveMode(doc["mode"])
    n = doc["n_arms"]
    items = []
    tags = []
    for rec in doc["items"]:
        if "values" in rec:
            items.append(IncentiveVector(np.asarray(rec["values"], dtype=float), mode))
        elif rec.get("support_arm") is None:
            items.append(IncentiveVector.zero(n, mode))
        else:
            items.append(IncentiveVector.single(n, rec["support_arm"], rec["value"]))
        prov = rec.get("provenance", {})
        tags.append(
            MenuTag(
                arm=prov.get("arm"),
                agent=prov.get("agent"),
                perturbed=prov.get("perturbed", False),
                profile=tuple(prov["profile"]) if "profile" in prov else None,
            )
        )
    return Menu(items, tags)


def save_json(path, doc: dict):
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")


def load_json(path) -> dict:
    with open(path) as fh:
        return json.load(fh)
