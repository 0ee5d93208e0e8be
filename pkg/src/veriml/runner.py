"""Scenario execution: build the supplier/provider fixtures a config
describes (training once per content digest, cached on disk), run seeded
verification trials — concurrently if asked — and aggregate into a
machine-readable report that is byte-reproducible apart from wall time.
"""

from __future__ import annotations

import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import canon
from . import config as cfgmod
from ._version import __version__
from .adversarial import (AttackConfig, SigmoidParams, claim_check,
                          robustness_benchmark)
from .auditor import (BYZANTINE, HONEST, Ledger, ModelSpec, OracleProfile,
                      compute_metric, identity, make_model_spec,
                      run_audit_round)
from .data import BlobRecipe, Dataset, split_per_class
from .entities import (LatencyModel, Provider, SeedPublication, Supplier,
                       provider_classify)
from .errors import ParameterError
from .mlp import (SOFTMAX, MlpModel, SeedConfig, TrainConfig, forward,
                  init_mlp, load_model, save_model, train_sgd)
from .rng import derive_seed, uniform_array
from .steg import (RevealClassifier, StegModel, load_steg_bundle,
                   save_steg_bundle, train_steg_joint)
from .verifiers import (LIKELY_FRAUDULENT, ProbePlan, StegSuite,
                        deterministic_benchmark, measure_roundtrip,
                        metaresult_verify, probabilistic_benchmark, steg_probe)

_LATENCY_PINGS = 4


# -- fixture cache --------------------------------------------------------------


def cache_dir() -> Path:
    override = os.environ.get("VERIML_CACHE_DIR")
    if override:
        return Path(override)
    return Path.home() / ".cache" / "veriml"


def _cache_fetch(key: bytes) -> bytes | None:
    path = cache_dir() / (key.hex() + ".bin")
    try:
        return path.read_bytes()
    except OSError:
        return None


def _cache_store(key: bytes, blob: bytes) -> None:
    root = cache_dir()
    try:
        root.mkdir(parents=True, exist_ok=True)
        tmp = root / (key.hex() + ".tmp")
        tmp.write_bytes(blob)
        os.replace(tmp, root / (key.hex() + ".bin"))
    except OSError:
        pass  # a cold cache only costs retraining time


def _arch_bytes(arch: tuple[int, ...]) -> bytes:
    return canon.u16(len(arch)) + b"".join(canon.u32(d) for d in arch)


def _model_cache_key(arch: tuple[int, ...], tcfg: TrainConfig,
                     recipe: BlobRecipe, train_per_class: int, stride: int,
                     adversarial_epsilon: float) -> bytes:
    return canon.sha256(b"model.v1" + _arch_bytes(arch) + tcfg.canonical_bytes()
                        + recipe.canonical_bytes() + canon.u32(train_per_class)
                        + canon.u32(stride) + canon.f64(adversarial_epsilon))


def _steg_cache_key(secret_dim: int, beta: float, tcfg: TrainConfig,
                    recipe: BlobRecipe, train_per_class: int) -> bytes:
    return canon.sha256(b"steg.v1" + canon.u32(secret_dim) + canon.f64(beta)
                        + tcfg.canonical_bytes() + recipe.canonical_bytes()
                        + canon.u32(train_per_class))


# -- fixture construction -------------------------------------------------------


@dataclass
class _DataBundle:
    recipe: BlobRecipe
    train: Dataset
    held: Dataset | None
    train_per_class: int


def _build_data(block: dict) -> _DataBundle:
    recipe = BlobRecipe(block["n_classes"], block["n_per_class"], block["dim"],
                        block["spread"], block["seed"])
    pool = recipe.build()
    tpc = block["train_per_class"]
    if tpc == block["n_per_class"]:
        return _DataBundle(recipe, pool, None, tpc)
    train, held = split_per_class(pool, tpc)
    return _DataBundle(recipe, train, held, tpc)


def _seed_and_train_cfg(train_block: dict, data_seed: int) -> tuple[SeedConfig, TrainConfig]:
    seeds = SeedConfig(train_block["weight_seed"], train_block["shuffle_seed"],
                       train_block.get("data_seed", data_seed))
    return seeds, TrainConfig(train_block["learning_rate"],
                              train_block["epochs"], train_block["batch_size"],
                              seeds)


def _trained_model(arch: tuple[int, ...], tcfg: TrainConfig, bundle: _DataBundle,
                   stride: int, adversarial_epsilon: float) -> MlpModel:
    key = _model_cache_key(arch, tcfg, bundle.recipe, bundle.train_per_class,
                           stride, adversarial_epsilon)
    blob = _cache_fetch(key)
    if blob is not None:
        try:
            return load_model(blob, SOFTMAX)
        except Exception:
            pass  # stale or truncated entry: fall through and retrain
    data = bundle.train
    if stride > 1:
        data = data.subset(range(0, len(data), stride))
    model = train_sgd(init_mlp(arch, tcfg.seed_config.weight_seed), data, tcfg,
                      adversarial_epsilon=adversarial_epsilon)
    _cache_store(key, save_model(model))
    return model


def _latency_from(block: dict) -> LatencyModel:
    lat = block["latency"]
    return LatencyModel(lat["base_ms"], lat["jitter_ms"], lat["seed"])


@dataclass
class _Fixtures:
    data: _DataBundle
    supplier: Supplier | None = None
    provider_kind: str | None = None
    cheap_model: MlpModel | None = None
    cheat_rate: float = 0.0
    noise_sigma: float = 0.0
    provider_latency: LatencyModel | None = None
    suite: StegSuite | None = None
    probe_covers: np.ndarray | None = None
    publication: SeedPublication | None = None
    mac_key: bytes | None = None
    model_spec: ModelSpec | None = None

    def fresh_provider(self) -> Provider:
        """Providers carry per-run mutable state (the replay cache), so each
        trial gets its own instance over the shared immutable fixtures."""
        return Provider(kind=self.provider_kind, backend=self.supplier,
                        cheap_model=self.cheap_model, cheat_rate=self.cheat_rate,
                        cache={}, noise_sigma=self.noise_sigma,
                        latency=self.provider_latency)


def _steg_pair(raw: dict, fx: _Fixtures) -> tuple[StegModel, RevealClassifier]:
    block = raw["steg"]
    _, tcfg = _seed_and_train_cfg(block["train"], data_seed=0)
    key = _steg_cache_key(block["secret_dim"], block["beta"], tcfg,
                          fx.data.recipe, fx.data.train_per_class)
    blob = _cache_fetch(key)
    if blob is not None:
        try:
            return load_steg_bundle(blob)
        except Exception:
            pass
    steg, reveal = train_steg_joint(fx.data.train, block["secret_dim"],
                                    block["beta"], tcfg)
    _cache_store(key, save_steg_bundle(steg, reveal))
    return steg, reveal


def build_fixtures(cfg: cfgmod.ScenarioConfig) -> _Fixtures:
    raw = cfg.raw
    sup_block = raw["supplier"]
    fx = _Fixtures(data=_build_data(sup_block["data"]))
    arch = tuple(sup_block["architecture"])
    seeds, tcfg = _seed_and_train_cfg(sup_block["train"],
                                      data_seed=sup_block["data"]["seed"])

    if cfg.scenario == cfgmod.AUDITOR:
        ver = raw["verifier"]
        fx.model_spec = make_model_spec(arch, seeds, tcfg, fx.data.recipe,
                                        ver["metric"], ver["metric_class"])
        return fx

    mac_hex = sup_block.get("mac_key_hex")
    fx.mac_key = bytes.fromhex(mac_hex) if mac_hex else None
    model = _trained_model(arch, tcfg, fx.data, stride=1,
                           adversarial_epsilon=sup_block["adversarial_epsilon"])

    prov_block = raw["provider"]
    cheap_block = prov_block.get("cheap")
    if cheap_block is not None:
        _, cheap_tcfg = _seed_and_train_cfg(cheap_block["train"],
                                            data_seed=sup_block["data"]["seed"])
        fx.cheap_model = _trained_model(tuple(cheap_block["architecture"]),
                                        cheap_tcfg, fx.data,
                                        stride=cheap_block["subsample_stride"],
                                        adversarial_epsilon=cheap_block["adversarial_epsilon"])
    fx.provider_kind = prov_block["kind"]
    fx.cheat_rate = prov_block["cheat_rate"]
    fx.noise_sigma = prov_block["noise_sigma"]
    fx.provider_latency = _latency_from(prov_block)

    reveal = None
    if cfg.scenario == cfgmod.STEG_PROBE:
        steg, reveal = _steg_pair(raw, fx)
    fx.supplier = Supplier(model=model, reveal=reveal, mac_key=fx.mac_key,
                           latency=_latency_from(sup_block))

    if cfg.scenario == cfgmod.STEG_PROBE:
        block = raw["steg"]
        cal = block["calibration_count"]
        covers = fx.data.held.inputs
        p_detect, p_clean = measure_roundtrip(fx.supplier, steg, reveal, model,
                                              covers[:cal],
                                              block["calibration_seed"])
        fx.suite = StegSuite(steg, reveal, model, p_detect, p_clean)
        fx.probe_covers = covers[cal:]
    elif cfg.scenario == cfgmod.DETERMINISTIC_BENCH:
        fx.publication = SeedPublication(seeds, tcfg, arch)
    return fx


# -- per-scenario trials --------------------------------------------------------


def _mean_latency(provider: Provider, dim: int, seed: int) -> float:
    state = derive_seed(seed, 7)
    total = 0.0
    for _ in range(_LATENCY_PINGS):
        x, state = uniform_array(state, dim)
        resp, state = provider_classify(provider, x, state)
        total += resp.latency_ms
    return total / _LATENCY_PINGS


def _trial_steg(fx: _Fixtures, raw: dict, seed: int) -> dict:
    ver = raw["verifier"]
    plan = ProbePlan(ver["k"], ver["frac_steg"], seed, ver["alpha"])
    provider = fx.fresh_provider()
    verdict = steg_probe(provider, fx.suite, fx.probe_covers, plan)
    lat = _mean_latency(provider, fx.data.recipe.dim, seed)
    return {"seed": seed, "verdict": verdict.to_dict(), "latency_ms": lat}


def _trial_deterministic(fx: _Fixtures, raw: dict, seed: int) -> dict:
    n_q = raw["verifier"]["n_queries"]
    dim = fx.data.recipe.dim
    flat, _ = uniform_array(derive_seed(seed, 1), n_q * dim)
    queries = flat.reshape(n_q, dim)
    provider = fx.fresh_provider()
    verdict = deterministic_benchmark(provider, fx.publication, fx.data.recipe,
                                      queries, rng=derive_seed(seed, 2))
    lat = _mean_latency(provider, dim, seed)
    return {"seed": seed, "verdict": verdict.to_dict(), "latency_ms": lat}


def _trial_probabilistic(fx: _Fixtures, raw: dict, seed: int) -> dict:
    ver = raw["verifier"]
    provider = fx.fresh_provider()
    verdict = probabilistic_benchmark(provider, fx.supplier, fx.data.held,
                                      ver["k"], ver["alpha"], seed)
    lat = _mean_latency(provider, fx.data.recipe.dim, seed)
    return {"seed": seed, "verdict": verdict.to_dict(), "latency_ms": lat}


def _trial_metaresult(fx: _Fixtures, raw: dict, seed: int) -> dict:
    k = raw["verifier"]["k"]
    dim = fx.data.recipe.dim
    provider = fx.fresh_provider()
    state = derive_seed(seed, 1)
    pairs = []
    for _ in range(k):
        x, state = uniform_array(state, dim)
        resp, state = provider_classify(provider, x, state)
        pairs.append((x, resp))
    verdict = metaresult_verify(pairs, fx.mac_key)
    lat = _mean_latency(provider, dim, seed)
    return {"seed": seed, "verdict": verdict.to_dict(), "latency_ms": lat}


def _trial_robustness(fx: _Fixtures, raw: dict, seed: int) -> dict:
    ver = raw["verifier"]
    dim = fx.data.recipe.dim
    classes = list(range(fx.data.recipe.n_classes))
    acfg = AttackConfig(tau=ver["tau"], step_size=ver["step_size"],
                        max_queries=ver["max_queries"])
    params = SigmoidParams(ver["sigmoid"]["q0"], ver["sigmoid"]["s_scale"])

    # the supplier's published claims: its own model measured under the same
    # attack seeds the verifier is about to use on the service
    supplier_model = fx.supplier.model
    claimed = robustness_benchmark(lambda x: forward(supplier_model, x), dim,
                                   classes, ver["trials_per_class"], acfg,
                                   params, seed)

    provider = fx.fresh_provider()
    box = {"rng": derive_seed(seed, 3)}

    def service(x):
        resp, box["rng"] = provider_classify(provider, x, box["rng"])
        return resp.probs

    measured = robustness_benchmark(service, dim, classes,
                                    ver["trials_per_class"], acfg, params, seed)
    verdict = claim_check(measured, [(s.class_id, s.score) for s in claimed],
                          ver["tolerance"])
    lat = _mean_latency(provider, dim, seed)
    return {"seed": seed, "verdict": verdict.to_dict(), "latency_ms": lat,
            "claimed_scores": [s.to_dict() for s in claimed],
            "measured_scores": [s.to_dict() for s in measured]}


def _trial_auditor(fx: _Fixtures, raw: dict, seed: int) -> dict:
    ver = raw["verifier"]
    n, nb = ver["n_oracles"], ver["n_byzantine"]
    ids = [identity(f"oracle-{i}") for i in range(n)]
    oracles = [OracleProfile(ids[i], HONEST) for i in range(n - nb)]
    for j in range(nb):
        offset = ver["byzantine_offset"] * (1.0 if j % 2 == 0 else -1.0)
        oracles.append(OracleProfile(ids[n - nb + j], BYZANTINE, offset=offset))
    client = identity("client-0")
    balances = {client: ver["client_balance"]}
    balances.update({oid: ver["oracle_balance"] for oid in ids})
    ledger = Ledger(balances)
    _, tally = run_audit_round(ledger, client, fx.model_spec, ver["fee"], oracles)
    truth = compute_metric(fx.model_spec)
    return {"seed": seed, "latency_ms": 0.0,
            "consensus": tally is not None,
            "consensus_value": tally.value if tally else None,
            "value_matches_truth": bool(tally and abs(tally.value - truth) < 1e-9),
            "majority_size": len(tally.majority_oracle_ids) if tally else 0,
            "chain_ok": ledger.verify_chain(),
            "conservation": ledger.conservation_holds(),
            "n_blocks": len(ledger.blocks)}


_TRIAL_FNS = {
    cfgmod.STEG_PROBE: _trial_steg,
    cfgmod.DETERMINISTIC_BENCH: _trial_deterministic,
    cfgmod.PROBABILISTIC_BENCH: _trial_probabilistic,
    cfgmod.METARESULT: _trial_metaresult,
    cfgmod.ROBUSTNESS: _trial_robustness,
    cfgmod.AUDITOR: _trial_auditor,
}


# -- campaign driver ------------------------------------------------------------


def _aggregate(scenario: str, trials: list[dict]) -> dict:
    n = len(trials)
    mean_latency = sum(t["latency_ms"] for t in trials) / n
    if scenario == cfgmod.AUDITOR:
        ok = sum(t["consensus"] and t["value_matches_truth"] and t["chain_ok"]
                 and t["conservation"] for t in trials)
        return {"detection_rate": ok / n, "mean_p_value": None,
                "mean_latency_ms": mean_latency}
    flagged = sum(t["verdict"]["decision"] == LIKELY_FRAUDULENT for t in trials)
    inconclusive = sum(t["verdict"]["decision"] == "Inconclusive" for t in trials)
    mean_p = sum(t["verdict"]["p_value"] for t in trials) / n
    return {"detection_rate": flagged / n, "inconclusive_rate": inconclusive / n,
            "mean_p_value": mean_p, "mean_latency_ms": mean_latency}


def run_scenario(cfg: cfgmod.ScenarioConfig, jobs: int = 1) -> dict:
    started = time.time()
    fx = build_fixtures(cfg)
    trial_fn = _TRIAL_FNS[cfg.scenario]
    seeds = [derive_seed(cfg.master_seed, t) for t in range(cfg.trials)]
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(lambda s: trial_fn(fx, cfg.raw, s), seeds))
    else:
        results = [trial_fn(fx, cfg.raw, s) for s in seeds]
    return {
        "schema_version": cfgmod.SCHEMA_VERSION,
        "version": __version__,
        "scenario": cfg.scenario,
        "master_seed": cfg.master_seed,
        "trials": cfg.trials,
        "config": cfg.raw,
        "trial_results": results,
        "aggregates": _aggregate(cfg.scenario, results),
        "wall_time_s": round(time.time() - started, 6),
    }


def sweep(cfg: cfgmod.ScenarioConfig, param_name: str, values: list,
          jobs: int = 1) -> list[dict]:
    """One run_scenario per value of a numeric config field (dotted path,
    e.g. "provider.cheat_rate"); fixtures are shared through the disk cache."""
    reports = []
    for value in values:
        raw = cfgmod.set_config_value(cfg.raw, param_name, value)
        reports.append(run_scenario(cfgmod.validate_config(raw), jobs=jobs))
    return reports


def report_to_json(report: dict) -> str:
    return json.dumps(report, sort_keys=True, indent=2) + "\n"


def explain_verdict(report: dict, trial_index: int) -> str:
    """Human-readable evidence chain for one trial of a report."""
    trials = report.get("trial_results")
    if not isinstance(trials, list):
        raise ParameterError("report has no trial_results list")
    if not 0 <= trial_index < len(trials):
        raise ParameterError(
            f"trial index {trial_index} out of range [0, {len(trials)})")
    entry = trials[trial_index]
    lines = [f"scenario {report.get('scenario')} trial {trial_index} "
             f"(seed {entry.get('seed')})"]
    verdict = entry.get("verdict")
    if verdict is not None:
        lines.append(f"  method:            {verdict['method']}")
        lines.append(f"  decision:          {verdict['decision']}")
        lines.append(f"  probes used:       {verdict['n_probes']}")
        lines.append(f"  statistic:         {verdict['statistic']:.6g}")
        lines.append(f"  p-value:           {verdict['p_value']:.6g}")
        lines.append(f"  cheat probability: {verdict['cheat_probability']:.6g}")
        lines.append(f"  evidence: {verdict['detail']}")
    else:
        for key in ("consensus", "consensus_value", "value_matches_truth",
                    "majority_size", "chain_ok", "conservation", "n_blocks"):
            lines.append(f"  {key}: {entry.get(key)}")
    cfg = report.get("config", {})
    lines.append("  verifier settings: "
                 + json.dumps(cfg.get("verifier"), sort_keys=True))
    return "\n".join(lines)


def auditor_demo(master_seed: int = 42, rounds: int = 3) -> dict:
    """A self-contained multi-round audit on one ledger, returning the full
    chain export. Deterministic given the seed: reruns are byte-identical."""
    raw = cfgmod.builtin_config(cfgmod.AUDITOR, trials=1, master_seed=master_seed)
    cfg = cfgmod.validate_config(raw)
    fx = build_fixtures(cfg)
    ver = cfg.raw["verifier"]

    n, nb = ver["n_oracles"], ver["n_byzantine"]
    ids = [identity(f"oracle-{i}") for i in range(n)]
    oracles = [OracleProfile(ids[i], HONEST) for i in range(n - nb)]
    for j in range(nb):
        offset = ver["byzantine_offset"] * (1.0 if j % 2 == 0 else -1.0)
        oracles.append(OracleProfile(ids[n - nb + j], BYZANTINE, offset=offset))
    client = identity("client-0")
    balances = {client: ver["client_balance"]}
    balances.update({oid: ver["oracle_balance"] for oid in ids})
    ledger = Ledger(balances)

    round_entries = []
    for r in range(rounds):
        fee = ver["fee"] + 3 * r  # vary the fee so remainder handling shows up
        _, tally = run_audit_round(ledger, client, fx.model_spec, fee, oracles)
        round_entries.append({
            "fee": fee,
            "consensus": tally is not None,
            "consensus_value": tally.value if tally else None,
            "majority_size": len(tally.majority_oracle_ids) if tally else 0,
        })
    return {
        "schema_version": cfgmod.SCHEMA_VERSION,
        "version": __version__,
        "master_seed": master_seed,
        "config": cfg.raw,
        "rounds": round_entries,
        "final_balances": {k.hex(): v for k, v in sorted(ledger.balances.items())},
        "chain_ok": ledger.verify_chain(),
        "conservation": ledger.conservation_holds(),
        "ledger_jsonl": ledger.export_jsonl().splitlines(),
    }
