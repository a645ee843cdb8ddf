"""Modo CLI do simulador.

Uso exemplo:
  python main_cli.py run --config cenario.json --seed 7 --out saida/
  python main_cli.py sweep --config cenario.json --axis eta --values 0.67,0.8,1.0 --out varredura/
  python main_cli.py figures --id fig1
  python main_cli.py bounds --params limites.json --out limites.csv
  python main_cli.py audit --eta 0.8 --trials 10000

Códigos de saída: 0 limpo, 2 violação de propriedade, 3 erro de wrapper/configuração, 1 erro inesperado.
"""
import argparse
import json
import logging
from pathlib import Path
import sys

logging.basicConfig(level=logging.INFO, format="%(asctime)s - %(name)s - %(levelname)s - %(message)s")
logger = logging.getLogger(__name__)

from autosyn import analysis, bounds, config, figures, harness
from autosyn.output_formats import report_json_text, write_report_json, write_table

EXIT_CLEAN = 0
EXIT_UNEXPECTED = 1
EXIT_VIOLATION = 2
EXIT_CONFIG = 3


def parse_values(text: str):
    """Lista separada por vírgulas; cada item é lido como JSON quando possível."""
    values = []
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        try:
            values.append(json.loads(item))
        except json.JSONDecodeError:
            values.append(item)
    return values


def cmd_run(args) -> int:
    scenario = config.load_scenario(args.config, seed=args.seed)
    report = harness.run_to_dir(scenario, Path(args.out), txt=args.txt, pdf=args.pdf)
    logger.info(f"Status: {report.status}" + (f" ({report.verdict})" if report.verdict else ""))
    return report.exit_code


def cmd_sweep(args) -> int:
    scenario = config.load_scenario(args.config, seed=args.seed)
    rows = harness.sweep(scenario, args.axis, parse_values(args.values), out_dir=Path(args.out),
                         n_jobs=args.jobs, progress=True)
    codes = [row["exit_code"] for row in rows]
    logger.info(f"Varredura concluída: {len(rows)} células")
    if EXIT_VIOLATION in codes:
        return EXIT_VIOLATION
    return EXIT_CLEAN


def cmd_figures(args) -> int:
    result = figures.run_figure(args.id, seeds=args.seeds)
    if args.out:
        write_report_json(result.to_dict(), Path(args.out) / f"{args.id}.json")
    logger.info(f"{args.id}: esperado {result.expected}, obtido {result.actual} -> {'ok' if result.ok else 'falhou'}")
    return result.exit_code


def cmd_bounds(args) -> int:
    grid = config.load_params(args.params)
    if args.axis:
        if len(grid) != 1:
            raise config.ConfigError("--axis exige um único conjunto de parâmetros base")
        grid = bounds.expand_grid(grid[0], args.axis, parse_values(args.values or ""))
    rows = bounds.bounds_table(grid)
    if args.out:
        write_table(rows, Path(args.out))
    else:
        sys.stdout.write(report_json_text(rows))
    flagged = sum(1 for row in rows if row["flags"])
    logger.info(f"Limites calculados para {len(rows)} linhas ({flagged} sinalizadas)")
    return EXIT_CLEAN


def cmd_audit(args) -> int:
    case = analysis.lemma3_case_audit(args.eta, trials=args.trials, seed=args.seed)
    mismatches = analysis.divergence_equivalence(args.max_length)
    result = {"cases": case.to_dict(), "divergence_mismatches": mismatches}
    if args.out:
        write_report_json(result, Path(args.out) / "audit.json")
    else:
        sys.stdout.write(report_json_text(result))
    ok = case.ok and not mismatches
    logger.info(f"Auditoria {'ok' if ok else 'falhou'}: {len(mismatches)} divergências diferentes")
    return EXIT_CLEAN if ok else EXIT_VIOLATION


def parse_args(argv=None):
    parser = argparse.ArgumentParser(description="CLI do simulador de consenso com rounds autoajustáveis")
    parser.add_argument("--verbose", "-v", action="store_true", help="Log em nível DEBUG")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="Executa um cenário")
    p.add_argument("--config", "-c", required=True, help="Arquivo JSON do cenário")
    p.add_argument("--seed", type=int, default=None, help="Substitui a seed do cenário")
    p.add_argument("--out", "-o", default=str(Path.cwd() / "run_out"), help="Pasta de saída")
    p.add_argument("--txt", action="store_true", help="Gera também report.txt")
    p.add_argument("--pdf", action="store_true", help="Gera também report.pdf (requer reportlab)")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="Varre um parâmetro do cenário")
    p.add_argument("--config", "-c", required=True, help="Arquivo JSON do cenário base")
    p.add_argument("--axis", required=True, help="Campo do cenário a variar")
    p.add_argument("--values", required=True, help="Valores separados por vírgula")
    p.add_argument("--seed", type=int, default=None, help="Substitui a seed do cenário")
    p.add_argument("--jobs", type=int, default=1, help="Processos paralelos (joblib)")
    p.add_argument("--out", "-o", default=str(Path.cwd() / "sweep_out"), help="Pasta de saída")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("figures", help="Executa um cenário roteirizado")
    p.add_argument("--id", required=True, choices=figures.FIGURE_IDS, help="Cenário")
    p.add_argument("--seeds", type=int, default=1000, help="Seeds da fig5")
    p.add_argument("--out", "-o", default=None, help="Pasta para o resultado JSON")
    p.set_defaults(func=cmd_figures)

    p = sub.add_parser("bounds", help="Calcula os limites de erro para uma grade de parâmetros")
    p.add_argument("--params", "-p", required=True, help="JSON com um objeto ou lista de objetos")
    p.add_argument("--axis", default=None, help="Campo a variar sobre o único conjunto base")
    p.add_argument("--values", default=None, help="Valores do eixo separados por vírgula")
    p.add_argument("--out", "-o", default=None, help="CSV de saída (padrão: JSON no stdout)")
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("audit", help="Auditoria das reduções e da divergência")
    p.add_argument("--eta", type=float, required=True, help="Razão de entrega")
    p.add_argument("--trials", type=int, default=10_000, help="Sorteios por cenário")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-length", type=int, default=12, help="Comprimento máximo na equivalência")
    p.add_argument("--out", "-o", default=None, help="Pasta para audit.json")
    p.set_defaults(func=cmd_audit)
    return parser.parse_args(argv)


def main(argv=None) -> int:
    args = parse_args(argv)
    if args.verbose:
        logging.getLogger().setLevel(logging.DEBUG)
    try:
        return args.func(args)
    except (config.ConfigError, harness.WrapperViolation, bounds.AdmissibilityError, bounds.ConstraintError) as e:
        logger.error(f"Erro de configuração: {e}")
        return EXIT_CONFIG
    except Exception as e:
        logger.exception(f"Falha no comando {args.command}: {e}")
        return EXIT_UNEXPECTED


if __name__ == "__main__":
    sys.exit(main())
