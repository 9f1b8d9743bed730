"""Entry point: python -m markov_agg <command>"""

import sys

from markov_agg.cli import main

if __name__ == "__main__":
    sys.exit(main())
