"""Deterministic NSL-KDD-format corpus for tests.

Real KDDTrain+ is not redistributable inside this repo, so suites that
need a full-shaped dataset generate one: 43-field lines with the real
column layout, realistic value ranges, and a learnable class structure.
Only the 12 default working features carry class signal; every other
feature is class-independent noise (num_outbound_cmds is constant 0,
exercising the zero-variance ranking convention).
"""

import numpy as np

SERVICES = ("domain_u", "eco_i", "ecr_i", "finger", "ftp_data", "http", "pop_3", "private", "smtp", "telnet")
FLAGS = ("REJ", "RSTR", "S0", "SF")
PROTOCOLS = ("icmp", "tcp", "udp")

ATTACK_LABELS = ("neptune", "smurf", "back", "teardrop", "portsweep", "satan", "nmap", "ipsweep")

ATTACK_FRACTION = 0.465
DOS_FRACTION = 0.7  # of attacks; the rest look like probes


def _choice(rng, values, weights, n):
    w = np.asarray(weights, dtype=np.float64)
    return rng.choice(len(values), size=n, p=w / w.sum())


def _rates(rng, lo, hi, n):
    return np.round(rng.uniform(lo, hi, size=n), 2)


def generate_records(n, seed=7):
    """Return (list of 43-field line strings, attack mask)."""
    rng = np.random.default_rng(seed)
    attack = rng.random(n) < ATTACK_FRACTION
    dos = attack & (rng.random(n) < DOS_FRACTION)
    probe = attack & ~dos
    normal = ~attack

    cols = {}

    def mix(name, normal_draw, dos_draw, probe_draw):
        out = np.empty(n, dtype=object)
        out[normal] = normal_draw(int(normal.sum()))
        out[dos] = dos_draw(int(dos.sum()))
        out[probe] = probe_draw(int(probe.sum()))
        cols[name] = out

    def same(name, draw):
        cols[name] = draw(n)

    # --- class-signal features (the default 12) -------------------------
    mix(
        "protocol_type",
        lambda m: np.array(PROTOCOLS)[_choice(rng, PROTOCOLS, (0.05, 0.55, 0.40), m)],
        lambda m: np.array(PROTOCOLS)[_choice(rng, PROTOCOLS, (0.20, 0.79, 0.01), m)],
        lambda m: np.array(PROTOCOLS)[_choice(rng, PROTOCOLS, (0.25, 0.70, 0.05), m)],
    )
    svc = np.array(SERVICES)
    mix(
        "service",
        lambda m: svc[_choice(rng, SERVICES, (0.20, 0.01, 0.01, 0.02, 0.10, 0.40, 0.05, 0.05, 0.11, 0.05), m)],
        lambda m: svc[_choice(rng, SERVICES, (0.01, 0.02, 0.25, 0.01, 0.02, 0.10, 0.01, 0.55, 0.02, 0.01), m)],
        lambda m: svc[_choice(rng, SERVICES, (0.02, 0.28, 0.05, 0.20, 0.02, 0.08, 0.01, 0.30, 0.02, 0.02), m)],
    )
    flg = np.array(FLAGS)
    mix(
        "flag",
        lambda m: flg[_choice(rng, FLAGS, (0.03, 0.02, 0.02, 0.93), m)],
        lambda m: flg[_choice(rng, FLAGS, (0.20, 0.02, 0.70, 0.08), m)],
        lambda m: flg[_choice(rng, FLAGS, (0.30, 0.20, 0.10, 0.40), m)],
    )
    mix(
        "count",
        lambda m: rng.integers(1, 31, size=m),
        lambda m: rng.integers(100, 512, size=m),
        lambda m: rng.integers(1, 61, size=m),
    )
    mix(
        "logged_in",
        lambda m: (rng.random(m) < 0.75).astype(int),
        lambda m: (rng.random(m) < 0.02).astype(int),
        lambda m: (rng.random(m) < 0.05).astype(int),
    )
    low_rate = lambda m: np.where(rng.random(m) < 0.9, 0.0, _rates(rng, 0.0, 0.15, m))
    high_rate = lambda m: np.where(rng.random(m) < 0.85, _rates(rng, 0.7, 1.0, m), _rates(rng, 0.0, 0.3, m))
    mid_rate = lambda m: _rates(rng, 0.1, 0.6, m)
    mix("serror_rate", low_rate, high_rate, mid_rate)
    mix("srv_serror_rate", low_rate, high_rate, lambda m: _rates(rng, 0.05, 0.5, m))
    mix(
        "same_srv_rate",
        lambda m: _rates(rng, 0.8, 1.0, m),
        lambda m: _rates(rng, 0.0, 0.25, m),
        lambda m: _rates(rng, 0.1, 0.9, m),
    )
    mix(
        "dst_host_srv_count",
        lambda m: rng.integers(80, 256, size=m),
        lambda m: rng.integers(0, 41, size=m),
        lambda m: rng.integers(1, 81, size=m),
    )
    mix(
        "dst_host_same_srv_rate",
        lambda m: _rates(rng, 0.7, 1.0, m),
        lambda m: _rates(rng, 0.0, 0.3, m),
        lambda m: _rates(rng, 0.0, 0.6, m),
    )
    mix("dst_host_serror_rate", low_rate, lambda m: _rates(rng, 0.7, 1.0, m), mid_rate)
    mix("dst_host_srv_serror_rate", low_rate, lambda m: _rates(rng, 0.7, 1.0, m), lambda m: _rates(rng, 0.05, 0.6, m))

    # --- class-independent noise ----------------------------------------
    same("duration", lambda m: np.where(rng.random(m) < 0.8, 0, rng.exponential(300, m).astype(int)))
    bytes_draw = lambda m: np.where(rng.random(m) < 0.3, 0, np.minimum(rng.lognormal(6, 2, m).astype(int), 10**6))
    same("src_bytes", bytes_draw)
    same("dst_bytes", bytes_draw)
    same("land", lambda m: (rng.random(m) < 0.001).astype(int))
    same("wrong_fragment", lambda m: np.where(rng.random(m) < 0.99, 0, rng.integers(1, 4, size=m)))
    same("urgent", lambda m: (rng.random(m) < 0.001).astype(int))
    same("hot", lambda m: np.where(rng.random(m) < 0.95, 0, rng.integers(1, 31, size=m)))
    same("num_failed_logins", lambda m: np.where(rng.random(m) < 0.98, 0, rng.integers(1, 6, size=m)))
    same("num_compromised", lambda m: np.where(rng.random(m) < 0.97, 0, rng.integers(1, 11, size=m)))
    same("root_shell", lambda m: (rng.random(m) < 0.01).astype(int))
    same("su_attempted", lambda m: np.where(rng.random(m) < 0.98, 0, rng.integers(1, 3, size=m)))
    same("num_root", lambda m: np.where(rng.random(m) < 0.97, 0, rng.integers(1, 11, size=m)))
    same("num_file_creations", lambda m: np.where(rng.random(m) < 0.97, 0, rng.integers(1, 6, size=m)))
    same("num_shells", lambda m: (rng.random(m) < 0.005).astype(int))
    same("num_access_files", lambda m: (rng.random(m) < 0.02).astype(int))
    same("num_outbound_cmds", lambda m: np.zeros(m, dtype=int))  # constant column
    same("is_host_login", lambda m: (rng.random(m) < 0.001).astype(int))
    same("is_guest_login", lambda m: (rng.random(m) < 0.03).astype(int))
    same("srv_count", lambda m: rng.integers(1, 51, size=m))
    err_rate = lambda m: np.where(rng.random(m) < 0.8, 0.0, _rates(rng, 0.0, 1.0, m))
    same("rerror_rate", err_rate)
    same("srv_rerror_rate", err_rate)
    same("diff_srv_rate", lambda m: _rates(rng, 0.0, 0.3, m))
    same("srv_diff_host_rate", lambda m: _rates(rng, 0.0, 0.5, m))
    same("dst_host_count", lambda m: rng.integers(1, 256, size=m))
    same("dst_host_diff_srv_rate", lambda m: _rates(rng, 0.0, 0.5, m))
    same("dst_host_same_src_port_rate", lambda m: _rates(rng, 0.0, 1.0, m))
    same("dst_host_srv_diff_host_rate", lambda m: _rates(rng, 0.0, 0.3, m))
    same("dst_host_rerror_rate", err_rate)
    same("dst_host_srv_rerror_rate", err_rate)

    labels = np.where(
        attack,
        np.array(ATTACK_LABELS)[rng.integers(0, len(ATTACK_LABELS), size=n)],
        "normal",
    )
    difficulty = rng.integers(10, 22, size=n)

    from nidsdl.ingest import NSL_KDD_FEATURES

    def fmt(name, v):
        if isinstance(v, (np.floating, float)):
            return f"{v:.2f}"
        return str(v)

    ordered = [cols[name] for name, _ in NSL_KDD_FEATURES]
    lines = []
    for i in range(n):
        fields = [fmt(name, col[i]) for (name, _), col in zip(NSL_KDD_FEATURES, ordered)]
        fields.append(str(labels[i]))
        fields.append(str(difficulty[i]))
        lines.append(",".join(fields))
    return lines, attack


def write_corpus(path, n, seed=7):
    lines, attack = generate_records(n, seed)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    return attack
