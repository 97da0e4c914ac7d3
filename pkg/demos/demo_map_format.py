"""The compact map format: build, serialize, parse, and measure.

Constructs a tiny map by hand, shows the exact file bytes, round-trips it,
and prints the compression bookkeeping against a pretend dense original.
"""

from edgeloc import (
    CompactMap,
    LineSegmentLandmark,
    SemanticLabel,
    WireframeLandmark,
    map_statistics,
    parse_map,
    serialize_map,
)
from edgeloc.compact_map import maps_equal


def main():
    lane = SemanticLabel("lane_line", "road")
    pole = SemanticLabel("lamp_pole", "nonroad")
    sign = SemanticLabel("traffic_sign", "nonroad")

    landmarks = (
        LineSegmentLandmark(lane, [0, -1.75, 0], [12.5, -1.75, 0], landmark_id=0),
        LineSegmentLandmark(lane, [0, 1.75, 0], [12.5, 1.75, 0], landmark_id=1),
        LineSegmentLandmark(pole, [6, 6.5, 0], [6, 6.5, 6], pole_radius=0.15, landmark_id=2),
        WireframeLandmark(
            sign,
            [[10, -0.6, 2.8], [10, 0.6, 2.8], [10, 0.6, 3.6], [10, -0.6, 3.6]],
            landmark_id=3,
        ),
    )
    compact = CompactMap((lane, pole, sign), landmarks)

    data = serialize_map(compact)
    print("serialized map file:")
    print(data.decode())

    again = parse_map(data)
    print(f"round trip exact: {maps_equal(compact, again)}")

    stats = map_statistics(compact, original_size_bytes=50_000_000)
    print(f"landmarks: {stats.total_landmarks} "
          f"({stats.n_segments} segments, {stats.n_wireframes} wireframes)")
    print(f"per label: {stats.per_label_counts}")
    print(f"compact size: {stats.compact_size_bytes} bytes")
    print(f"compression vs a 50 MB dense map: {stats.compression_factor:,.0f}x")


if __name__ == "__main__":
    main()
