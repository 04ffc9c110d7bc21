import numpy as np
import pytest

from tabarm.autoencoder import (
    TrainConfig,
    forward,
    init_xavier,
    loss_and_grads,
    recon_loss,
    train,
)
from tabarm.errors import EmbeddingFormatError
from tabarm.finetune import (
    cosine_alignment_loss,
    default_projection_config,
    finetune_dl,
    finetune_wi,
    init_projection_encoder,
    load_embeddings,
    make_synthetic_embeddings,
    save_embeddings,
    train_projection_encoder,
)
from test_autoencoder import (
    correlated_matrix,
    numerical_grads,
    random_one_hot,
    relative_error,
    schema_with_spans,
)


class TestExchangeFormat:
    def test_roundtrip(self, tmp_path):
        em = make_synthetic_embeddings(3, 4, seed=5)
        path = str(tmp_path / "e.embed")
        save_embeddings(em, path)
        loaded = load_embeddings(path)
        np.testing.assert_array_equal(loaded.values, em.values)
        assert loaded.meta == em.meta

    def test_declared_shape(self, tmp_path):
        path = str(tmp_path / "e.embed")
        save_embeddings(make_synthetic_embeddings(3, 4, seed=0), path)
        first = open(path).readline().strip()
        assert first == "EMBEDV1,n=3,d_e=4"

    def test_row_count_mismatch(self, tmp_path):
        path = tmp_path / "bad.embed"
        path.write_text(
            "EMBEDV1,n=3,d_e=2\n"
            '{"n":3,"d_e":2,"source_model":"x","target_column":null,"folds":0,"seed":0}\n'
            "1,2\n3,4\n"
        )
        with pytest.raises(EmbeddingFormatError, match="expected 3 data rows"):
            load_embeddings(str(path))

    def test_width_mismatch(self, tmp_path):
        path = tmp_path / "bad.embed"
        path.write_text(
            "EMBEDV1,n=1,d_e=3\n"
            '{"n":1,"d_e":3,"source_model":"x","target_column":null,"folds":0,"seed":0}\n'
            "1,2\n"
        )
        with pytest.raises(EmbeddingFormatError, match="row 0 has 2"):
            load_embeddings(str(path))

    def test_header_meta_disagreement(self, tmp_path):
        path = tmp_path / "bad.embed"
        path.write_text(
            "EMBEDV1,n=2,d_e=2\n"
            '{"n":3,"d_e":2,"source_model":"x","target_column":null,"folds":0,"seed":0}\n'
            "1,2\n3,4\n"
        )
        with pytest.raises(EmbeddingFormatError, match="disagree"):
            load_embeddings(str(path))

    def test_nan_locates_coordinates(self, tmp_path):
        path = tmp_path / "bad.embed"
        path.write_text(
            "EMBEDV1,n=2,d_e=2\n"
            '{"n":2,"d_e":2,"source_model":"x","target_column":null,"folds":0,"seed":0}\n'
            "1,2\n3,NaN\n"
        )
        with pytest.raises(ValueError, match="row 1, column 1"):
            load_embeddings(str(path))


class TestCosineLoss:
    def test_identical_rows_zero(self):
        P = np.array([[1.0, 2.0], [3.0, -1.0]])
        assert cosine_alignment_loss(P, P) == pytest.approx(0.0, abs=1e-12)

    def test_orthogonal_rows_one(self):
        P = np.array([[1.0, 0.0], [0.0, 2.0]])
        E = np.array([[0.0, 3.0], [5.0, 0.0]])
        assert cosine_alignment_loss(P, E) == pytest.approx(1.0, abs=1e-12)

    def test_aligned_plus_antipodal_averages_to_one(self):
        P = np.array([[1.0, 0.0], [1.0, 0.0]])
        E = np.array([[2.0, 0.0], [-2.0, 0.0]])
        assert cosine_alignment_loss(P, E) == pytest.approx(1.0, abs=1e-12)

    def test_zero_norm_row_counts_as_cos_zero(self):
        P = np.array([[0.0, 0.0], [1.0, 0.0]])
        E = np.array([[1.0, 0.0], [1.0, 0.0]])
        assert cosine_alignment_loss(P, E) == pytest.approx(0.5, abs=1e-12)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError, match="shape"):
            cosine_alignment_loss(np.ones((2, 3)), np.ones((3, 2)))


class TestProjectionEncoder:
    def test_training_deterministic(self):
        rng = np.random.default_rng(0)
        X = rng.uniform(0, 1, (16, 6))
        E = make_synthetic_embeddings(16, 4, seed=1)
        cfg = TrainConfig(epochs=5, batch_size=4, seed=2, validation_fraction=0.2)
        g1 = train_projection_encoder(X, E, cfg, hidden=5)
        g2 = train_projection_encoder(X, E, cfg, hidden=5)
        for a, b in zip(g1.parameters(), g2.parameters()):
            np.testing.assert_array_equal(a, b)

    def test_eval_forward_deterministic(self):
        g = init_projection_encoder(6, 5, 4, seed=3)
        x = np.random.default_rng(4).uniform(0, 1, (8, 6))
        np.testing.assert_array_equal(g.forward_eval(x), g.forward_eval(x))

    def test_loss_decreases(self):
        rng = np.random.default_rng(5)
        X = rng.uniform(0, 1, (16, 6))
        E = make_synthetic_embeddings(16, 4, seed=6)
        cfg = TrainConfig(epochs=25, batch_size=2, seed=7, validation_fraction=0.0)
        initial = init_projection_encoder(6, 5, 4, seed=cfg.seed)
        before = cosine_alignment_loss(initial.forward_eval(X), E.values)
        trained = train_projection_encoder(X, E, cfg, hidden=5)
        after = cosine_alignment_loss(trained.forward_eval(X), E.values)
        assert after <= before

    def test_row_count_checked(self):
        E = make_synthetic_embeddings(4, 3, seed=0)
        with pytest.raises(ValueError, match="rows"):
            train_projection_encoder(np.ones((5, 2)), E, TrainConfig(epochs=1), hidden=3)


class TestFinetuneWI:
    def test_zero_epochs_keeps_transferred_first_layer(self):
        schema, matrix = correlated_matrix()
        E = make_synthetic_embeddings(matrix.n_rows, 6, seed=1)
        cfg = TrainConfig(epochs=0, batch_size=2, seed=9)
        model = finetune_wi(matrix, E, cfg, layer_dims=[4, 3, 2])
        projector = train_projection_encoder(
            matrix.values, E, default_projection_config(cfg.seed), hidden=3
        )
        np.testing.assert_array_equal(model.encoder[0].W, projector.W1)
        np.testing.assert_array_equal(model.encoder[0].b, projector.b1)

    def test_remaining_layers_match_xavier_draw(self):
        schema, matrix = correlated_matrix()
        E = make_synthetic_embeddings(matrix.n_rows, 6, seed=1)
        cfg = TrainConfig(epochs=0, batch_size=2, seed=9)
        model = finetune_wi(matrix, E, cfg, layer_dims=[4, 3, 2])
        reference = init_xavier([4, 3, 2], seed=9, schema=schema)
        for got, want in zip(model.layers[1:], reference.layers[1:]):
            np.testing.assert_array_equal(got.W, want.W)
            np.testing.assert_array_equal(got.b, want.b)

    def test_full_run_reduces_loss(self):
        schema, matrix = correlated_matrix()
        E = make_synthetic_embeddings(matrix.n_rows, 6, seed=2)
        cfg = TrainConfig(epochs=25, batch_size=2, seed=0)
        model = finetune_wi(matrix, E, cfg, layer_dims=[4, 3, 2])
        untrained = finetune_wi(
            matrix, E, TrainConfig(epochs=0, batch_size=2, seed=0), layer_dims=[4, 3, 2]
        )
        before = recon_loss(forward(untrained, matrix.values), matrix.values)
        after = recon_loss(forward(model, matrix.values), matrix.values)
        assert after < before

    def test_row_pairing_checked(self):
        _, matrix = correlated_matrix()
        E = make_synthetic_embeddings(matrix.n_rows + 1, 6, seed=0)
        with pytest.raises(ValueError, match="rows"):
            finetune_wi(matrix, E, TrainConfig(epochs=1, batch_size=2))


class TestFinetuneDL:
    def test_lambda_zero_matches_plain_training(self):
        schema, matrix = correlated_matrix()
        E = make_synthetic_embeddings(matrix.n_rows, 6, seed=3)
        cfg = TrainConfig(epochs=4, batch_size=2, seed=11)
        dl_model = finetune_dl(matrix, E, cfg, lambda_proj=0.0, layer_dims=[4, 3, 2])
        plain = train(init_xavier([4, 3, 2], cfg.seed, schema), matrix, cfg)
        for a, b in zip(dl_model.layers, plain.layers):
            np.testing.assert_array_equal(a.W, b.W)
            np.testing.assert_array_equal(a.b, b.b)

    def test_projection_frozen_in_phase_two(self, monkeypatch):
        # the phase-2 hook must keep using the pre-phase-2 parameters
        schema, matrix = correlated_matrix()
        E = make_synthetic_embeddings(matrix.n_rows, 6, seed=4)
        captured = {}

        import tabarm.finetune as ft

        original = ft.train_projection_encoder

        def capture(*args, **kwargs):
            encoder = original(*args, **kwargs)
            captured["params"] = [p.copy() for p in encoder.parameters()]
            captured["encoder"] = encoder
            return encoder

        monkeypatch.setattr(ft, "train_projection_encoder", capture)
        finetune_dl(
            matrix, E, TrainConfig(epochs=3, batch_size=2, seed=5), layer_dims=[4, 3, 2]
        )
        for now, before in zip(captured["encoder"].parameters(), captured["params"]):
            np.testing.assert_array_equal(now, before)

    def test_total_loss_at_least_reconstruction_term(self):
        rng = np.random.default_rng(6)
        schema = schema_with_spans(2, 2)
        model = init_xavier([4, 3, 2], seed=6, schema=schema)
        g = init_projection_encoder(4, 3, 5, seed=7)
        E = rng.standard_normal((3, 5))
        x = random_one_hot(schema, 3, rng)
        noisy = np.clip(x + rng.normal(0, 0.5, x.shape), 0, 1)

        def extra(probs, idx):
            out = g.forward_eval(probs)
            loss = cosine_alignment_loss(out, E[idx])
            return loss, np.zeros_like(probs)  # only the value matters here

        total, _ = loss_and_grads(model, noisy, x, extra=extra)
        recon_only, _ = loss_and_grads(model, noisy, x)
        assert total >= recon_only

    def test_double_loss_gradients_match_finite_differences(self):
        rng = np.random.default_rng(8)
        schema = schema_with_spans(3, 2, 4)
        model = init_xavier([9, 5, 3], seed=8, schema=schema)
        g = init_projection_encoder(9, 5, 6, seed=9)
        E = rng.standard_normal((4, 6))
        x = random_one_hot(schema, 4, rng)
        noisy = np.clip(x + rng.normal(0, 0.5, x.shape), 0, 1)
        lam = 0.7

        from tabarm.finetune import _cosine_loss_grad

        def extra(probs, idx):
            out, cache = g._forward(np.atleast_2d(probs), None)
            loss, gout = _cosine_loss_grad(out, E[idx])
            _, gx = g._backward(cache, gout)
            return lam * loss, lam * gx

        idx = np.arange(4)
        _, analytic = loss_and_grads(model, noisy, x, extra=extra, batch_idx=idx)

        def objective():
            probs = forward(model, noisy)
            proj = g.forward_eval(probs)
            return recon_loss(probs, x) + lam * cosine_alignment_loss(proj, E)

        numeric = numerical_grads(objective, model.parameters())
        for ga, gn in zip(analytic, numeric):
            assert relative_error(ga, gn) <= 1e-4

    def test_dl_training_runs_and_differs_from_plain(self):
        schema, matrix = correlated_matrix()
        E = make_synthetic_embeddings(matrix.n_rows, 6, seed=10)
        cfg = TrainConfig(epochs=4, batch_size=2, seed=12)
        dl_model = finetune_dl(matrix, E, cfg, lambda_proj=1.0, layer_dims=[4, 3, 2])
        plain = train(init_xavier([4, 3, 2], cfg.seed, schema), matrix, cfg)
        assert any(
            not np.array_equal(a.W, b.W) for a, b in zip(dl_model.layers, plain.layers)
        )
