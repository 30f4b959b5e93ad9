"""
JSON API over the command-line commands.

    GET  /                 name, version and the available commands
    POST /run/<command>    body {"config": {...}, "mdp": {...}, "policy": [[...]], "phi": [...]}

The response body is the same report the CLI writes. Exit codes 0 and 1 are
returned with HTTP 200 (the code is in the body), input errors with HTTP 400.
"""
import logging

from flask import Flask, request
from waitress import serve

from lambda_mdp import __version__
from lambda_mdp.cli import EXIT_INPUT_ERROR, run
from lambda_mdp.config import COMMANDS, DEFAULTS, RunConfig, configure_logging
from lambda_mdp.errors import LambdaMdpError
from lambda_mdp.io_utils import dumps_report, parse_mdp, parse_phi, parse_policy

logger = logging.getLogger(__name__)

app = Flask(__name__)
app.config['defaults'] = dict(DEFAULTS)
# the server never reads or writes files named by a client
app.config['forbidden_keys'] = ("mdp_path", "policy_path", "policy_prime_path", "phi_path",
                                "output", "trajectories_out", "counterexample_dir")


def _json_response(payload: dict, status: int):
    return app.response_class(dumps_report(payload), status=status, mimetype="application/json")


def _error(command: str, message: str):
    return _json_response({"command": command, "version": __version__, "error": message,
                           "exit_code": EXIT_INPUT_ERROR}, 400)


@app.route("/")
def index():
    return _json_response({"name": "lambda_mdp", "version": __version__,
                           "commands": list(COMMANDS)}, 200)


@app.route("/run/<command>", methods=["POST"])
def run_command(command):
    body = request.get_json(silent=True)
    if body is None:
        body = {}
    if not isinstance(body, dict):
        return _error(command, "request body must be a JSON object")
    values = body.get("config", {})
    if not isinstance(values, dict):
        return _error(command, "config must be a JSON object")
    forbidden = sorted(set(values) & set(app.config['forbidden_keys']))
    if forbidden:
        return _error(command, f"file options are not accepted over HTTP: {', '.join(forbidden)}")
    try:
        config = RunConfig.from_mapping(command, values)
        model = parse_mdp(body["mdp"], source="mdp") if "mdp" in body else None
        policy = parse_policy(body["policy"], source="policy") if "policy" in body else None
        phi = parse_phi(body["phi"], source="phi") if "phi" in body else None
    except LambdaMdpError as e:
        return _error(command, str(e))
    code, report = run(config, model=model, policy=policy, phi=phi)
    report["exit_code"] = code
    logger.info("%s finished with exit code %d", command, code)
    return _json_response(report, 400 if code == EXIT_INPUT_ERROR else 200)


if __name__ == "__main__":
    configure_logging()
    host, port = app.config['defaults']['host'], app.config['defaults']['port']
    logger.warning("serving lambda_mdp %s on %s:%d", __version__, host, port)
    serve(app, host=host, port=port)
