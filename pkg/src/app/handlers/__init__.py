from src.app.handlers.eval import register_eval_command
from src.app.handlers.report import register_report_command
from src.app.handlers.sweep import register_sweep_command
from src.app.handlers.synth import register_synth_command
from src.app.handlers.train import register_train_command


def register_all_commands(subparsers) -> None:
    register_train_command(subparsers)
    register_eval_command(subparsers)
    register_synth_command(subparsers)
    register_sweep_command(subparsers)
    register_report_command(subparsers)
