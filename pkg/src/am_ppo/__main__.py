"""``python -m am_ppo`` runs the ``am-ppo`` command; pipelines run with ``kedro run``."""

import sys

from am_ppo.cli.main import main

if __name__ == "__main__":
    sys.exit(main())
