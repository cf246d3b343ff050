"""
Full-size galaxy field (optional, about a day)
==============================================

The 200 x 200 pixel field with 47 galaxies, run through the command-line
interface so the output directory can be inspected or postprocessed later.
Expect log Z near -3.2e5 and H of several hundred nats; the exact values
depend on the noise realisation.

    python3 demos/galaxy_full_scale.py [out_dir]
"""
import sys
from pathlib import Path

from rjnest import cli

out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("runs/galaxy_full")
data_dir = out / "data"

# 1. simulate the image and write the true catalogue next to it
cli.main(["generate", "galaxyfield", "--seed", "1", "--size", "200", "--count", "47",
          "--out", str(data_dir)])

# 2. sample; the galaxyfield preset has 800 levels of 10000 records each
code = cli.main(["run", "--model", "galaxyfield", "--data",
                 str(data_dir / "galaxyfield_image.txt"), "--n-max", "100",
                 "--seed", "1", "--out", str(out), "--force"])

# 3. evidence, information, posterior over N and the likelihood curve
if code == 0:
    cli.main(["postprocess", str(out)])
