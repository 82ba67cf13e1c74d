from mdlab.cli import main

raise SystemExit(main())
