from esfrlab.cli import main

raise SystemExit(main())
