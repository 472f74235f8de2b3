import numpy as np
import pytest

from kerbside.imaging import (
    DuplicatePrediction,
    EmptyTrainingSet,
    FeatureVector,
    MixedDescriptors,
    Prediction,
    PredictionSet,
    UnknownFrameId,
    import_predictions,
    predict_frames,
    train_knn,
)
from kerbside.imaging.classify import write_predictions
from kerbside.imaging.io import MissingImage, save_image
from kerbside.imaging.image import Image
from kerbside.ingest import ParseError
from kerbside.taxonomy import Frame, FrameSet, SurfaceClass


def fv(*values, descriptor="test:v1"):
    return FeatureVector(values=np.array(values, dtype=float), descriptor_id=descriptor)


A, C, G = SurfaceClass.ASPHALT, SurfaceClass.COBBLESTONE, SurfaceClass.GRASS


class TestTrainKnn:
    def test_single_point_k1(self):
        clf = train_knn([(fv(0.0, 0.0), G)], k=1)
        for query in [fv(0, 0), fv(100, -5), fv(3, 3)]:
            p = clf.predict(query)
            assert p.label is G and p.confidence == 1.0

    def test_majority_matches_brute_force_sort(self):
        # 2 asphalt near the origin, 1 grass far away; oracle = distance sort.
        training = [(fv(0.1, 0.0), A), (fv(0.0, 0.1), A), (fv(5.0, 5.0), G)]
        query = fv(0.0, 0.0)
        dists = sorted(
            (float(np.linalg.norm(vec.values - query.values)), label)
            for vec, label in training
        )
        votes = [label for _, label in dists[:3]]
        assert votes.count(A) == 2  # oracle confirms the majority
        p = train_knn(training, k=3).predict(query)
        assert p.label is A
        assert p.confidence == pytest.approx(2 / 3)

    def test_zero_distance_dominance(self):
        training = [(fv(1.0, 1.0), A), (fv(2.0, 2.0), C), (fv(3.0, 3.0), G)]
        clf = train_knn(training, k=1)
        for vec, label in training:
            assert clf.predict(vec).label is label

    def test_tie_broken_by_nearest_member(self):
        # k=2: one vote each; cobblestone is nearer.
        training = [(fv(1.0), C), (fv(-2.0), A)]
        p = train_knn(training, k=2).predict(fv(0.0))
        assert p.label is C

    def test_tie_broken_by_canonical_order(self):
        # equal votes, equal distances: asphalt precedes cobblestone.
        training = [(fv(1.0), C), (fv(-1.0), A)]
        p = train_knn(training, k=2).predict(fv(0.0))
        assert p.label is A

    def test_empty_training_set(self):
        with pytest.raises(EmptyTrainingSet):
            train_knn([], k=1)

    def test_mixed_descriptors(self):
        with pytest.raises(MixedDescriptors):
            train_knn([(fv(1.0), A), (fv(2.0, descriptor="other:v2"), C)], k=1)

    def test_query_descriptor_checked(self):
        clf = train_knn([(fv(1.0), A)], k=1)
        with pytest.raises(MixedDescriptors):
            clf.predict(fv(1.0, descriptor="other:v2"))

    def test_k_larger_than_training_clamped(self):
        clf = train_knn([(fv(0.0), A), (fv(1.0), A)], k=9)
        assert clf.predict(fv(0.5)).label is A

    def test_bad_k(self):
        with pytest.raises(ValueError):
            train_knn([(fv(0.0), A)], k=0)


def make_frames(tmp_path, specs):
    """specs: list of (frame_id, fill_value). Writes 4x6 portrait PGMs."""
    frames = []
    for i, (fid, value) in enumerate(specs):
        img = Image(pixels=np.full((6, 4), value, dtype=np.uint8))
        save_image(img, tmp_path / f"{fid}.pgm")
        frames.append(
            Frame(frame_id=fid, timestamp_ms=i * 800, lat=0.0, lon=0.0, image_ref=f"{fid}.pgm")
        )
    return FrameSet(frames=tuple(frames))


class TestPredictFrames:
    def _trained(self):
        # Brightness-separable two-class problem in descriptor space.
        from kerbside.imaging import extract_features
        from kerbside.imaging.features import PREPROCESS_SIZE

        dark = extract_features(Image(pixels=np.full((PREPROCESS_SIZE, PREPROCESS_SIZE), 30, np.uint8)))
        light = extract_features(Image(pixels=np.full((PREPROCESS_SIZE, PREPROCESS_SIZE), 220, np.uint8)))
        return train_knn([(dark, A), (light, G)], k=1)

    def test_order_independent(self, tmp_path):
        clf = self._trained()
        frames = make_frames(tmp_path, [("f1", 20), ("f2", 210), ("f3", 40)])
        permuted = FrameSet(frames=tuple(reversed(frames.frames)))
        p1 = predict_frames(clf, frames, tmp_path)
        p2 = predict_frames(clf, permuted, tmp_path)
        assert dict(p1.items()) == dict(p2.items())
        assert p1.label_of("f1") is A
        assert p1.label_of("f2") is G

    def test_empty_frameset(self, tmp_path):
        assert len(predict_frames(self._trained(), FrameSet(frames=()), tmp_path)) == 0

    def test_missing_image(self, tmp_path):
        frames = FrameSet(
            frames=(Frame(frame_id="f1", timestamp_ms=0, lat=0, lon=0, image_ref="gone.pgm"),)
        )
        with pytest.raises(MissingImage):
            predict_frames(self._trained(), frames, tmp_path)

    def test_frame_independence_under_mutation(self, tmp_path):
        clf = self._trained()
        frames = make_frames(tmp_path, [("f1", 20), ("f2", 210), ("f3", 40)])
        before = predict_frames(clf, frames, tmp_path)
        # mutate only f3's image
        save_image(Image(pixels=np.full((6, 4), 215, np.uint8)), tmp_path / "f3.pgm")
        after = predict_frames(clf, frames, tmp_path)
        assert after.get("f1") == before.get("f1")
        assert after.get("f2") == before.get("f2")
        assert after.label_of("f3") is G


class TestImportPredictions:
    def frames(self):
        return FrameSet(
            frames=tuple(
                Frame(frame_id=f"f{i}", timestamp_ms=i, lat=0, lon=0, image_ref="x")
                for i in range(3)
            )
        )

    def test_happy_path(self, tmp_path):
        path = tmp_path / "p.csv"
        path.write_text(
            "frame_id,predicted_label,confidence\nf0,pavement,0.9\nf1,pavement,\nf2,Pavement,1\n"
        )
        ps = import_predictions(path, self.frames())
        assert len(ps) == 3
        assert ps.get("f1").confidence == 1.0
        assert ps.label_of("f2") is SurfaceClass.PAVEMENT

    def test_two_column_header(self, tmp_path):
        path = tmp_path / "p.csv"
        path.write_text("frame_id,predicted_label\nf0,grass\n")
        assert import_predictions(path, self.frames()).label_of("f0") is SurfaceClass.GRASS

    def test_unknown_frame(self, tmp_path):
        path = tmp_path / "p.csv"
        path.write_text("frame_id,predicted_label,confidence\nnope,grass,1.0\n")
        with pytest.raises(UnknownFrameId):
            import_predictions(path, self.frames())

    def test_duplicate(self, tmp_path):
        path = tmp_path / "p.csv"
        path.write_text("frame_id,predicted_label,confidence\nf0,grass,1.0\nf0,grass,1.0\n")
        with pytest.raises(DuplicatePrediction):
            import_predictions(path, self.frames())

    def test_confidence_out_of_range(self, tmp_path):
        path = tmp_path / "p.csv"
        path.write_text("frame_id,predicted_label,confidence\nf0,grass,1.2\n")
        with pytest.raises(ParseError):
            import_predictions(path, self.frames())

    def test_bad_label(self, tmp_path):
        path = tmp_path / "p.csv"
        path.write_text("frame_id,predicted_label,confidence\nf0,snow,1.0\n")
        with pytest.raises(ParseError):
            import_predictions(path, self.frames())

    def test_write_read_round_trip(self, tmp_path):
        ps = PredictionSet(
            predictions={
                "f0": Prediction(SurfaceClass.GRASS, 0.5),
                "f1": Prediction(SurfaceClass.PAVEMENT, 1.0),
            }
        )
        path = tmp_path / "out.csv"
        write_predictions(ps, path)
        back = import_predictions(path, self.frames())
        assert back.label_of("f0") is SurfaceClass.GRASS
        assert back.get("f0").confidence == pytest.approx(0.5)


class TestPredictionSet:
    def test_merge_disjoint(self):
        a = PredictionSet(predictions={"f1": Prediction(A)})
        b = PredictionSet(predictions={"f2": Prediction(G)})
        merged = a.merged_with(b)
        assert len(merged) == 2

    def test_merge_collision_rejected(self):
        a = PredictionSet(predictions={"f1": Prediction(A)})
        with pytest.raises(DuplicatePrediction):
            a.merged_with(a)
