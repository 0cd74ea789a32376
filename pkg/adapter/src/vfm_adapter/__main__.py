import argparse
import os

import uvicorn

from .models import build_model
from .server import create_adapter_app


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="vfm-adapter",
        description="Serve a segmentation foundation model behind the backend protocol",
    )
    parser.add_argument("--port", type=int,
                        default=int(os.environ.get("VFM_ADAPTER_PORT", "8010")))
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--model", choices=("stub", "brightness", "sam2"), default="stub")
    parser.add_argument("--checkpoint", default=None, help="model weights (sam2 only)")
    parser.add_argument("--device", default="cpu")
    parser.add_argument("--render", default="grayscale",
                        help="NDVI-to-image rendering rule for model input")
    args = parser.parse_args(argv)

    model = build_model(args.model, checkpoint=args.checkpoint, device=args.device)
    app = create_adapter_app(model, render=args.render)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
