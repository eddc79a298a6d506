"""Write synthetic extract inputs (raw frames, detections JSONL, labels CSV).

Either the two-person demo clip or seeded random videos from the test corpus.
Prints the matching ``tubeforge extract`` command for each video.
"""

import argparse
from pathlib import Path

from tubeforge.synthetic import random_video, two_person_clip


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", required=True)
    parser.add_argument("--seeds", type=int, nargs="*", default=None,
                        help="random-video seeds; omit for the two-person clip")
    parser.add_argument("--frames", type=int, default=256, help="two-person clip length")
    args = parser.parse_args()

    out = Path(args.out)
    videos = ([(f"seed{s:03d}", random_video(s)) for s in args.seeds] if args.seeds
              else [("clip", two_person_clip(frame_count=args.frames))])
    for name, video in videos:
        paths = video.write(out, name)
        print(f"tubeforge extract --frames {paths['frames']} --width {video.width} --height {video.height} "
              f"--detections {paths['detections']} --labels {paths['labels']} --out {out / (name + '_tubes')}")


if __name__ == "__main__":
    main()
