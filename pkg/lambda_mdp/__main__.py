import sys

from lambda_mdp.cli import main

sys.exit(main())
