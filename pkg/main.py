import os
import sys

sys.path.append(os.path.join(os.path.dirname(os.path.abspath(__file__)), "backend"))

from cli import main  # noqa: E402

if __name__ == "__main__":
    sys.exit(main())
