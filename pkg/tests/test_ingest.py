"""Stream parsing, confidence gating, frame striding, and timeline chunking."""

import json
import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from shiftwatch.ingest import (
    Camera,
    DetectionClass,
    EmptyStream,
    IngestConfig,
    KeypointSet,
    MalformedRecord,
    chunk_bounds,
    chunk_timeline,
    gate_detections,
    parse_stream,
    serialize_frames,
    stride_frames,
)

from conftest import det_obj, frame_line, make_detection, make_frame


class TestParseStream:
    def test_minimal_valid_line(self):
        result = parse_stream(frame_line(0, 0.0), Camera.WALL)
        assert len(result.frames) == 1
        assert result.frames[0].frame_index == 0
        assert result.malformed == []

    def test_detections_parsed(self):
        line = frame_line(3, 1.5, detections=[det_obj("hardhat", 0.77, [1, 2, 3, 4])])
        (frame,) = parse_stream(line, Camera.WALL).frames
        (det,) = frame.detections
        assert det.class_label is DetectionClass.HARDHAT
        assert det.confidence == 0.77
        assert det.bbox == (1, 2, 3, 4)
        assert det.frame_index == 3
        assert det.timestamp_s == 1.5

    def test_optional_detection_fields(self):
        line = frame_line(
            0,
            0.0,
            detections=[det_obj(mask_centroid=[30.5, 60.0], appearance_rgb=[200, 30, 30])],
        )
        (det,) = parse_stream(line, Camera.WALL).frames[0].detections
        assert det.mask_centroid == (30.5, 60.0)
        assert det.appearance_rgb == (200, 30, 30)
        assert det.centroid() == (30.5, 60.0)

    def test_centroid_falls_back_to_bbox_center(self):
        det = make_detection(bbox=(10, 20, 40, 80))
        assert det.centroid() == (30, 60)

    def test_pose_parsed(self):
        kps = [[float(i), float(i * 2), 0.8] for i in range(17)]
        line = frame_line(0, 0.0, camera="POV", poses=[{"keypoints": kps}])
        (frame,) = parse_stream(line, Camera.POV).frames
        assert len(frame.poses[0].keypoints) == 17
        assert frame.poses[0].keypoints[5] == (5.0, 10.0, 0.8)

    def test_malformed_json_skipped_with_line_number(self):
        text = frame_line(0, 0.0) + "\n{not json}\n" + frame_line(1, 0.5)
        result = parse_stream(text, Camera.WALL)
        assert len(result.frames) == 2
        assert len(result.malformed) == 1
        assert result.malformed[0].line_number == 2

    def test_strict_mode_raises(self):
        text = frame_line(0, 0.0) + "\n{not json}\n"
        with pytest.raises(MalformedRecord):
            parse_stream(text, Camera.WALL, strict=True)

    @pytest.mark.parametrize(
        "bad",
        [
            '{"timestamp_s": 0.0}',
            '{"frame_index": -1, "timestamp_s": 0.0}',
            '{"frame_index": 0, "timestamp_s": -0.5}',
            '{"frame_index": 0, "timestamp_s": "zero"}',
            '{"frame_index": true, "timestamp_s": 0.0}',
            '["not", "an", "object"]',
        ],
        ids=["no-index", "negative-index", "negative-ts", "string-ts", "bool-index", "array"],
    )
    def test_header_schema_violations(self, bad):
        result = parse_stream(bad + "\n" + frame_line(0, 0.0), Camera.WALL)
        assert len(result.malformed) == 1
        assert len(result.frames) == 1

    @pytest.mark.parametrize(
        "det",
        [
            det_obj(label="unicorn"),
            det_obj(confidence=1.5),
            det_obj(confidence=-0.1),
            det_obj(bbox=[0, 0, 4]),
            det_obj(bbox=[0, 0, -4, 5]),
            det_obj(bbox=[0, 0, 4, 0]),
        ],
        ids=["unknown-class", "conf-high", "conf-neg", "bbox-short", "bbox-neg-w", "bbox-zero-h"],
    )
    def test_detection_schema_violations(self, det):
        text = frame_line(0, 0.0, detections=[det]) + "\n" + frame_line(1, 0.5)
        result = parse_stream(text, Camera.WALL)
        assert len(result.malformed) == 1
        assert [f.frame_index for f in result.frames] == [1]

    def test_detection_schema_violation_drops_whole_line(self):
        text = frame_line(0, 0.0, detections=[det_obj(confidence=2.0)]) + "\n" + frame_line(1, 0.5)
        result = parse_stream(text, Camera.WALL)
        assert [f.frame_index for f in result.frames] == [1]
        assert result.malformed[0].line_number == 1

    def test_wrong_keypoint_count_rejected(self):
        pose = {"keypoints": [[0.0, 0.0, 0.5]] * 16}
        result = parse_stream(
            frame_line(0, 0.0, camera="POV", poses=[pose]) + "\n" + frame_line(1, 0.1, camera="POV"),
            Camera.POV,
        )
        assert len(result.malformed) == 1
        assert "17" in result.malformed[0].reason

    def test_camera_mismatch_rejected(self):
        text = frame_line(0, 0.0, camera="POV") + "\n" + frame_line(1, 0.5, camera="WALL")
        result = parse_stream(text, Camera.WALL)
        assert [f.frame_index for f in result.frames] == [1]
        assert "camera" in result.malformed[0].reason

    def test_timestamp_regression_rejected(self):
        text = frame_line(0, 5.0) + "\n" + frame_line(1, 4.0) + "\n" + frame_line(2, 5.0)
        result = parse_stream(text, Camera.WALL)
        assert [f.frame_index for f in result.frames] == [0, 2]
        assert result.malformed[0].line_number == 2

    def test_empty_stream_raises(self):
        with pytest.raises(EmptyStream):
            parse_stream("", Camera.WALL)

    def test_all_malformed_raises_empty(self):
        with pytest.raises(EmptyStream):
            parse_stream("nope\nstill nope\n", Camera.WALL)

    def test_blank_lines_ignored(self):
        text = "\n" + frame_line(0, 0.0) + "\n\n" + frame_line(1, 0.5) + "\n\n"
        result = parse_stream(text, Camera.WALL)
        assert len(result.frames) == 2
        assert result.malformed == []

    def test_accepts_bytes(self):
        result = parse_stream(frame_line(0, 0.0).encode(), Camera.WALL)
        assert len(result.frames) == 1

    def test_frames_sorted_by_index(self):
        # equal timestamps, shuffled indices
        text = "\n".join(frame_line(i, 1.0) for i in [2, 0, 1])
        result = parse_stream(text, Camera.WALL)
        assert [f.frame_index for f in result.frames] == [0, 1, 2]

    def test_round_trip(self):
        text = "\n".join(
            [
                frame_line(0, 0.0, detections=[det_obj("worker", 0.91), det_obj("hardhat", 0.5)]),
                frame_line(
                    1,
                    0.5,
                    detections=[det_obj(mask_centroid=[1.0, 2.0], appearance_rgb=[1, 2, 3])],
                    poses=[{"keypoints": [[float(i), 0.0, 0.9] for i in range(17)]}],
                ),
            ]
        )
        frames = parse_stream(text, Camera.WALL).frames
        again = parse_stream(serialize_frames(frames), Camera.WALL).frames
        assert again == frames


class TestKeypointSet:
    def test_exactly_17_required(self):
        with pytest.raises(ValueError):
            KeypointSet(keypoints=((0.0, 0.0, 0.5),) * 16, frame_index=0, timestamp_s=0.0)


class TestIngestConfig:
    def test_defaults(self):
        cfg = IngestConfig()
        assert cfg.conf_gate == 0.15
        assert cfg.wall_frame_stride == 3
        assert cfg.chunk_length_s == 60.0

    @pytest.mark.parametrize(
        "kwargs",
        [{"conf_gate": -0.1}, {"conf_gate": 1.1}, {"wall_frame_stride": 0}, {"chunk_length_s": 0}],
    )
    def test_rejects_bad_values(self, kwargs):
        with pytest.raises(ValueError):
            IngestConfig(**kwargs)


class TestGateDetections:
    def test_gate_is_inclusive(self):
        """A detection sitting exactly on the gate survives."""
        frame = make_frame(detections=(make_detection(confidence=0.15),))
        (gated,) = gate_detections([frame], IngestConfig())
        assert len(gated.detections) == 1

    def test_example_set(self):
        frame = make_frame(
            detections=(
                make_detection(confidence=0.10),
                make_detection(confidence=0.15),
                make_detection(confidence=0.90),
            )
        )
        (gated,) = gate_detections([frame], IngestConfig())
        assert [d.confidence for d in gated.detections] == [0.15, 0.90]

    def test_poses_untouched(self):
        from conftest import make_pose

        frame = make_frame(
            detections=(make_detection(confidence=0.01),), poses=(make_pose(),)
        )
        (gated,) = gate_detections([frame], IngestConfig())
        assert gated.detections == ()
        assert len(gated.poses) == 1

    @given(
        st.lists(st.floats(min_value=0.0, max_value=1.0), max_size=20),
        st.floats(min_value=0.0, max_value=1.0),
    )
    def test_kept_iff_at_or_above_gate(self, confs, gate):
        frame = make_frame(detections=tuple(make_detection(confidence=c) for c in confs))
        (gated,) = gate_detections([frame], IngestConfig(conf_gate=gate))
        assert [d.confidence for d in gated.detections] == [c for c in confs if c >= gate]

    def test_idempotent(self):
        frames = [make_frame(detections=(make_detection(confidence=c),)) for c in (0.1, 0.5)]
        once = gate_detections(frames, IngestConfig())
        assert gate_detections(once, IngestConfig()) == once


class TestStrideFrames:
    def _wall_frames(self, n):
        return [make_frame(frame_index=i, timestamp_s=i * 0.5) for i in range(n)]

    def test_nine_frames_keep_every_third(self):
        kept = stride_frames(self._wall_frames(9), IngestConfig())
        assert [f.frame_index for f in kept] == [0, 3, 6]

    def test_ten_frames(self):
        kept = stride_frames(self._wall_frames(10), IngestConfig())
        assert [f.frame_index for f in kept] == [0, 3, 6, 9]

    def test_pov_passes_at_full_rate(self):
        frames = [
            make_frame(frame_index=i, timestamp_s=i * 0.5, camera=Camera.POV) for i in range(9)
        ]
        assert stride_frames(frames, IngestConfig()) == frames

    def test_stride_one_is_identity(self):
        frames = self._wall_frames(7)
        assert stride_frames(frames, IngestConfig(wall_frame_stride=1)) == frames

    def test_keyed_on_index_not_position(self):
        """Dropped upstream frames must not shift which frames are kept."""
        frames = [make_frame(frame_index=i, timestamp_s=i * 0.5) for i in (0, 2, 3, 4, 6)]
        kept = stride_frames(frames, IngestConfig())
        assert [f.frame_index for f in kept] == [0, 3, 6]

    @given(st.lists(st.integers(min_value=0, max_value=500), unique=True, min_size=1), st.integers(1, 10))
    def test_kept_set_is_multiples(self, indices, stride):
        frames = [make_frame(frame_index=i, timestamp_s=float(sorted(indices).index(i))) for i in sorted(indices)]
        kept = stride_frames(frames, IngestConfig(wall_frame_stride=stride))
        assert {f.frame_index for f in kept} == {i for i in indices if i % stride == 0}


class TestChunkBounds:
    def test_150s_gives_three_chunks(self):
        assert chunk_bounds(150.0) == [(0.0, 60.0), (60.0, 120.0), (120.0, 150.0)]

    def test_61s_gives_short_tail(self):
        assert chunk_bounds(61.0) == [(0.0, 60.0), (60.0, 61.0)]

    def test_exact_multiple(self):
        assert chunk_bounds(120.0) == [(0.0, 60.0), (60.0, 120.0)]

    def test_shorter_than_one_chunk(self):
        assert chunk_bounds(42.0) == [(0.0, 42.0)]

    def test_rejects_nonpositive_duration(self):
        with pytest.raises(ValueError):
            chunk_bounds(0.0)

    @given(st.floats(min_value=0.001, max_value=10_000), st.floats(min_value=1.0, max_value=600))
    def test_partition_properties(self, duration, length):
        bounds = chunk_bounds(duration, length)
        assert bounds[0][0] == 0.0
        assert bounds[-1][1] == pytest.approx(duration)
        for (s0, e0), (s1, e1) in zip(bounds, bounds[1:]):
            assert e0 == s1  # contiguous, no gaps or overlap
        assert all(e - s <= length + 1e-9 for s, e in bounds)


class TestChunkTimeline:
    def test_frames_routed_by_timestamp(self):
        frames = [make_frame(frame_index=i, timestamp_s=t) for i, t in enumerate([0.0, 59.9, 60.0, 149.0, 150.0])]
        chunks = chunk_timeline(frames, IngestConfig(), duration_s=150.0)
        assert [len(c.frames) for c in chunks] == [2, 1, 2]
        assert chunks[1].frames[0].timestamp_s == 60.0  # boundary frame goes right
        assert chunks[2].frames[-1].timestamp_s == 150.0  # final edge included

    def test_duration_defaults_to_last_timestamp(self):
        frames = [make_frame(frame_index=i, timestamp_s=float(i)) for i in range(0, 130, 10)]
        chunks = chunk_timeline(frames, IngestConfig())
        assert len(chunks) == 2
        assert chunks[-1].end_s == 120.0

    def test_video_uri_fragments(self):
        frames = [make_frame(frame_index=0, timestamp_s=0.0)]
        chunks = chunk_timeline(frames, IngestConfig(), video_uri="wall.mp4", duration_s=90.0)
        assert [c.video_uri for c in chunks] == ["wall.mp4#t=0,60", "wall.mp4#t=60,90"]

    def test_no_uri_when_base_missing(self):
        chunks = chunk_timeline([make_frame()], IngestConfig(), duration_s=30.0)
        assert chunks[0].video_uri is None

    def test_empty_frames_raise(self):
        with pytest.raises(EmptyStream):
            chunk_timeline([], IngestConfig())

    def test_single_instant_stream_yields_one_chunk(self):
        chunks = chunk_timeline([make_frame(timestamp_s=0.0)], IngestConfig())
        assert len(chunks) == 1
        assert len(chunks[0].frames) == 1

    @given(st.lists(st.floats(min_value=0.0, max_value=500.0), min_size=1, max_size=40))
    def test_every_frame_lands_in_exactly_one_chunk(self, stamps):
        stamps = sorted(stamps)
        frames = [make_frame(frame_index=i, timestamp_s=t) for i, t in enumerate(stamps)]
        chunks = chunk_timeline(frames, IngestConfig())
        placed = [f for c in chunks for f in c.frames]
        assert sorted(f.frame_index for f in placed) == [f.frame_index for f in frames]
        for c in chunks:
            for f in c.frames:
                assert c.start_s <= f.timestamp_s
                # the final edge frame may sit exactly on end_s
                assert f.timestamp_s < c.end_s or (c is chunks[-1] and f.timestamp_s == pytest.approx(c.end_s))
