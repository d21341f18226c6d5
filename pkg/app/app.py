import argparse
import logging
from pathlib import Path
from typing import List, Optional

from app.controllers.app_controller import AppController
from models import COMMANDS


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hamiltime",
        description="Hamiltonian discrimination, estimation and time-energy uncertainty experiments.",
    )
    parser.add_argument("command", choices=COMMANDS)

    io = parser.add_argument_group("runner")
    io.add_argument("--seed", type=int, help="64-bit seed (default from config.json)")
    io.add_argument("--out", help="output directory (default from config.json)")
    io.add_argument("--workers", type=int, help="sweep threads")
    io.add_argument("--config-dir", type=Path, help="directory holding config.json")
    io.add_argument("--verbose", action="store_true", help="debug logging")

    ops = parser.add_argument_group("operators")
    ops.add_argument("--h1", help="generator (pauli-z, -1*pauli-z, random-hermitian:4:7, ...) or JSON path")
    ops.add_argument("--h2", help="as --h1")
    ops.add_argument("--pair", help="preset pair: spin, xz, constant-shift")
    ops.add_argument("--layout", help="box,nobox,ancilla dimensions, e.g. 2,1,1")
    ops.add_argument("--protocol", help="protocol JSON file")

    num = parser.add_argument_group("numerics")
    num.add_argument("--dt", help="time, or comma list for spy")
    num.add_argument("--grid", type=int)
    num.add_argument("--trials", type=int)
    num.add_argument("--steps", type=int, help="Trotter steps of the saturation protocol")
    num.add_argument("--nu", type=float)
    num.add_argument("--d0", type=float)
    num.add_argument("--level", type=int, help="energy level index for spy")
    num.add_argument("--gamma", type=float)
    num.add_argument("--e0", type=float)

    sc = parser.add_argument_group("scenarios")
    sc.add_argument("--name", help="spin-fields, phase-box, farhi-gutmann, shared-eigenbasis")
    sc.add_argument("--muB0", type=float)
    sc.add_argument("--phi1", type=float)
    sc.add_argument("--phi2", type=float)
    sc.add_argument("--E", type=float)
    sc.add_argument("--dims", help="LOW..HIGH (powers of two) or comma list")
    sc.add_argument("--threshold", type=float)
    sc.add_argument("--e1", help="comma list of energies")
    sc.add_argument("--e2", help="comma list of energies")
    sc.add_argument("--k0", type=int)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = vars(build_parser().parse_args(argv))
    logging.basicConfig(format="[%(levelname)s] %(message)s", level=logging.INFO)
    controller = AppController(args.get("config_dir"))
    level = "DEBUG" if args.get("verbose") else controller.log_level
    logging.getLogger().setLevel(getattr(logging, level, logging.INFO))
    return controller.run(args)
