"""Exporter contract: primary-side validation, idempotence, end-to-end eval."""

import numpy as np
import pytest

from embexport import ExportJob, run_export
from memevidence import dataio, harness, model


def check(name: str, passed: bool, detail: str = "") -> None:
    status = "PASS" if passed else "FAIL"
    suffix = f"  ({detail})" if detail else ""
    print(f"ACCEPTANCE {name}: {status}{suffix}")
    assert passed, f"{name}: {detail}"


@pytest.fixture(scope="module")
def exported(meme_job, knowledge_source_files, tmp_path_factory):
    out = tmp_path_factory.mktemp("export_out")
    job = ExportJob(records=meme_job["records"], out_dir=str(out), dim=16,
                    base_dir=str(meme_job["root"]),
                    knowledge_emb=knowledge_source_files["emb"],
                    knowledge_words=knowledge_source_files["words"])
    manifest = run_export(job)
    return {"out": out, "manifest": manifest, "job": job}


class TestExporterContract:
    def test_every_file_passes_primary_validation(self, exported):
        corpus = dataio.load_corpus(exported["manifest"])
        ok = len(corpus) == 5
        for sample in corpus:
            ok &= sample.d == 16
            ok &= 1 <= sample.n <= 10
            ok &= set(sample.channels) == {"mm_meme", "text_meme", "image_meme",
                                           "knowledge"}
            ok &= bool(np.all(np.isfinite(sample.sentences)))
            ok &= int(sample.labels.sum()) >= 1
        check("exporter-validation", ok, f"{len(corpus)} samples, zero errors")

    def test_reexport_byte_idempotent(self, exported):
        out = exported["out"]
        before = {p: p.read_bytes() for p in sorted(out.rglob("*")) if p.is_file()}
        run_export(exported["job"])
        after = {p: p.read_bytes() for p in sorted(out.rglob("*")) if p.is_file()}
        check("exporter-idempotence", before == after,
              f"{len(before)} files byte-identical")

    def test_end_to_end_manifest_evaluates(self, exported):
        corpus = dataio.load_corpus(exported["manifest"])
        params = model.MimeParams.init(model.VariantSpec.full(), 16,
                                       np.random.default_rng(0), heads=2)
        report = harness.evaluate(params, corpus)
        gold = harness.evaluate(params, corpus, predictor=lambda s: s.labels)
        check("exporter-end-to-end",
              report.case_count == 5 and gold.f1 == 1.0,
              f"evaluated {report.case_count} real memes, F1 {report.f1:.3f}")

    def test_primary_has_no_dependency_on_exporter(self):
        import memevidence
        root = memevidence.__path__[0]
        import pathlib
        hits = [p for p in pathlib.Path(root).rglob("*.py")
                if "embexport" in p.read_text(encoding="utf-8")]
        check("exporter-isolation", not hits,
              "primary sources never import the exporter")
