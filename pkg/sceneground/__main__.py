import sys

from sceneground.cli import main

sys.exit(main())
