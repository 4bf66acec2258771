"""Smoke test for the pyjointlabel extension module."""

import os
import tempfile

import pyjointlabel as jl


def main():
    assert abs(jl.f_beta(0.8, 0.4, 0.5) - 2 / 3) < 1e-12
    m = jl.metrics([True, True, False, False], [True, False, True, False])
    assert (m["tp"], m["fp"], m["fn"], m["tn"]) == (1, 1, 1, 1)

    err = jl.gradcheck(1)
    assert err <= 1e-4, err

    train, dev, test = jl.synthetic(n_train=200, n_dev=50, n_test=50, seed=1)
    assert len(train) == 200
    tokens, labels, y = train.sentences()[0]
    assert len(tokens) == len(labels) and y == any(labels)
    assert len(jl.Dataset.parse(train.to_tsv())) == 200
    assert not any(l is not None for _, l, _ in train.mask_tokens(0.0, 1).sentences())

    cfg = jl.TrainConfig({"sizes": "desk", "max_epochs": "2", "seed": "3"})
    model, history, best_epoch, best = jl.train(cfg, train, dev)
    assert history.splitlines()[0].startswith("epoch,loss_sent")
    assert 1 <= best_epoch <= 2 and 0.0 <= best <= 1.0

    score, toks = model.predict(["the", "quick", "fox", "jumps"])
    assert 0.0 < score < 1.0 and len(toks) == 4
    assert abs(sum(w for _, _, w in toks) - 1.0) < 1e-9

    report = model.evaluate(test)
    assert set(report) == {"sentence", "token"}

    with tempfile.TemporaryDirectory() as d:
        path = os.path.join(d, "model.ckpt")
        model.save(path)
        again = jl.Model.load(path)
        assert again.predict(["the", "quick", "fox", "jumps"]) == (score, toks)
        assert again.config_text == cfg.to_text()
        try:
            jl.Model.load(os.path.join(d, "missing.ckpt"))
        except FileNotFoundError:
            pass
        else:
            raise AssertionError("missing checkpoint accepted")

    try:
        jl.TrainConfig({"colour": "red"})
    except ValueError:
        pass
    else:
        raise AssertionError("unknown key accepted")

    print("python smoke test passed")


if __name__ == "__main__":
    main()
