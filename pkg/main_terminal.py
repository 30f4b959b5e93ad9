# terminal entry point: the same commands as the HTTP API, one JSON report per run
import sys

from lambda_mdp.cli import main

if __name__ == "__main__":
    sys.exit(main())
