import datetime as dt
import hashlib
import json
import os
import string
import types

import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from behaviometry import _fsutil
from behaviometry.errors import BackendError, ConfigurationError, SidecarError, ValidationError
from behaviometry.provenance import (
    DEFAULT_RETENTION,
    Cache,
    CitationConfig,
    SidecarMetadata,
    citation_block,
    format_retention,
    hash_input,
    hash_inputs,
    load_templates,
    materialize_command,
    parse_retention,
    read_sidecar,
    run_backend,
    run_pipeline,
    should_reuse,
    sidecar_path,
    write_sidecar,
)

TZ = dt.timezone(dt.timedelta(hours=-4))
T0 = dt.datetime(2025, 7, 18, 12, 33, 50, tzinfo=TZ)
EMPTY = hashlib.sha256(b"").hexdigest()


class TestRetention:
    @pytest.mark.parametrize("text,seconds", [
        ("1 year", 31_536_000), ("3 minutes", 180), ("7 seconds", 7), ("1 Second", 1),
        ("2 WEEKS", 1_209_600), ("6 months", 15_552_000), ("12 hours", 43_200), ("1 day", 86_400),
    ])
    def test_parse(self, text, seconds):
        assert parse_retention(text).seconds == seconds

    def test_default(self):
        assert DEFAULT_RETENTION.seconds == 15_552_000

    @pytest.mark.parametrize("bad", ["", "year", "1 fortnight", "-1 day", "one day"])
    def test_bad(self, bad):
        with pytest.raises(ValidationError, match="second, minute"):
            parse_retention(bad)

    def test_fractional(self):
        assert parse_retention("1.5 minutes").seconds == 90
        with pytest.raises(ValidationError, match="whole number"):
            parse_retention("1.5 seconds")

    @given(st.integers(0, 10 ** 9))
    @settings(max_examples=200)
    def test_format_parse_identity(self, seconds):
        from behaviometry.provenance import RetentionPeriod

        text = format_retention(RetentionPeriod(seconds))
        assert parse_retention(text).seconds == seconds
        assert format_retention(parse_retention(text)) == text


class TestPathsAndHashes:
    def test_sidecar_path(self, tmp_path):
        assert sidecar_path("a/b.csv").as_posix() == "a/b.csv.json"
        assert sidecar_path("a/b").as_posix() == "a/b.json"
        assert sidecar_path("out/elaine_rects.3DI").as_posix() == "out/elaine_rects.3DI.json"
        with pytest.raises(ValidationError):
            sidecar_path("a/b.json")

    def test_hash(self, tmp_path):
        e = tmp_path / "empty"
        e.write_bytes(b"")
        assert hash_input(e) == EMPTY
        a, b = tmp_path / "a.bin", tmp_path / "b.bin"
        a.write_bytes(b"hello world")
        b.write_bytes(b"hello world")
        assert hash_input(a) == hash_input(b) == hashlib.sha256(b"hello world").hexdigest()
        b.write_bytes(b"hello worle")
        assert hash_input(a) != hash_input(b)

    def test_hash_streaming(self, tmp_path):
        p = tmp_path / "big"
        data = os.urandom(3 * 1024 + 17)
        p.write_bytes(data)
        assert hash_input(p, chunk_size=1024) == hashlib.sha256(data).hexdigest()

    def test_hash_inputs_order_sensitive(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        a.write_bytes(b"1")
        b.write_bytes(b"2")
        assert hash_inputs([a]) == hash_input(a)
        assert hash_inputs([a, b]) != hash_inputs([b, a])


def meta(tmp_path, now=T0, input_hash=EMPTY, **extra):
    return SidecarMetadata.create("3DI", "video_detect_landmarks /d/v.mp4 out", tmp_path / "v.mp4",
                                  input_hash, tmp_path, now=now, **extra)


class TestSidecar:
    def test_time_format(self, tmp_path):
        m = meta(tmp_path)
        assert m.time == "2025-07-18 12:33:50" and m.utc_offset == "-0400"

    def test_roundtrip(self, tmp_path):
        out = tmp_path / "o.csv"
        out.write_text("x")
        m = meta(tmp_path, camera=30, local_bases=True)
        write_sidecar(m, out)
        assert read_sidecar(out) == m
        raw = json.loads(sidecar_path(out).read_text())
        assert raw["camera"] == 30 and raw["time"] == "2025-07-18 12:33:50"

    text = st.text(string.ascii_letters + string.digits + " /._-", max_size=30)

    @given(backend=text.filter(bool), cmd=text, digest=st.binary(min_size=1, max_size=32),
           seconds=st.integers(0, 10 ** 9), extra=st.dictionaries(
               st.sampled_from(["morphable_model", "camera", "landmark", "fast"]),
               st.one_of(st.integers(), text, st.booleans())))
    @settings(max_examples=60, deadline=None,
              suppress_health_check=[HealthCheck.function_scoped_fixture])
    def test_roundtrip_random(self, tmp_path, backend, cmd, digest, seconds, extra):
        now = dt.datetime(2000, 1, 1, tzinfo=dt.timezone.utc) + dt.timedelta(seconds=seconds)
        m = SidecarMetadata.create(backend, cmd, "", digest.hex(), tmp_path, now=now, **extra)
        out = tmp_path / "r.csv"
        write_sidecar(m, out)
        assert read_sidecar(out) == m

    def test_missing_key(self, tmp_path):
        out = tmp_path / "o.csv"
        d = meta(tmp_path).to_dict()
        del d["input_hash"]
        sidecar_path(out).write_text(json.dumps(d))
        with pytest.raises(SidecarError, match="input_hash"):
            read_sidecar(out)

    @pytest.mark.parametrize("field,value", [("time", "2025/07/18"), ("input_hash", "ABC")])
    def test_invariants(self, tmp_path, field, value):
        d = meta(tmp_path).to_dict()
        d[field] = value
        with pytest.raises(SidecarError):
            SidecarMetadata.from_dict(d)

    def test_atomic_under_crash(self, tmp_path, monkeypatch):
        out = tmp_path / "o.csv"
        write_sidecar(meta(tmp_path), out)
        before = sidecar_path(out).read_text()

        def crash(src, dst):
            raise OSError("killed between write and rename")

        monkeypatch.setattr(_fsutil.os, "replace", crash)
        with pytest.raises(OSError):
            write_sidecar(meta(tmp_path, now=T0 + dt.timedelta(days=1)), out)
        monkeypatch.undo()
        assert sidecar_path(out).read_text() == before
        assert sorted(p.name for p in tmp_path.iterdir()) == ["o.csv.json"]


class TestShouldReuse:
    def setup_output(self, tmp_path, now=T0, input_hash=EMPTY):
        out = tmp_path / "o.csv"
        out.write_text("x")
        write_sidecar(meta(tmp_path, now=now, input_hash=input_hash), out)
        return out

    def test_reuse_fresh(self, tmp_path):
        out = self.setup_output(tmp_path)
        d = should_reuse(out, DEFAULT_RETENTION, EMPTY, now=T0 + dt.timedelta(days=1))
        assert d and d.reason == "within retention"

    def test_expired(self, tmp_path):
        out = self.setup_output(tmp_path)
        d = should_reuse(out, DEFAULT_RETENTION, EMPTY, now=T0 + dt.timedelta(days=200))
        assert not d and d.reason == "retention expired"

    def test_boundary_inclusive(self, tmp_path):
        out = self.setup_output(tmp_path)
        r = parse_retention("7 seconds")
        assert should_reuse(out, r, EMPTY, now=T0 + dt.timedelta(seconds=7))
        assert not should_reuse(out, r, EMPTY, now=T0 + dt.timedelta(seconds=8))

    def test_hash_mismatch(self, tmp_path):
        out = self.setup_output(tmp_path)
        d = should_reuse(out, DEFAULT_RETENTION, "ab" * 32, now=T0)
        assert not d and d.reason == "input changed"

    def test_reasons_in_order(self, tmp_path):
        out = tmp_path / "o.csv"
        assert should_reuse(out, DEFAULT_RETENTION, EMPTY).reason == "output missing"
        out.write_text("x")
        assert should_reuse(out, DEFAULT_RETENTION, EMPTY).reason == "sidecar missing"
        sidecar_path(out).write_text("{not json")
        assert should_reuse(out, DEFAULT_RETENTION, EMPTY).reason.startswith("sidecar unreadable")

    def test_cmd_change(self, tmp_path):
        out = self.setup_output(tmp_path)
        d = should_reuse(out, DEFAULT_RETENTION, EMPTY, now=T0, current_cmd="other")
        assert not d and d.reason == "command changed"

    def test_naive_now(self, tmp_path):
        out = self.setup_output(tmp_path, now=dt.datetime.now().astimezone())
        assert should_reuse(out, DEFAULT_RETENTION, EMPTY, now=dt.datetime.now())


class TestCache:
    def test_retention_setting(self, tmp_path):
        c = Cache(tmp_path)
        assert c.retention == DEFAULT_RETENTION
        c.change_retention_period("1 year")
        assert Cache(tmp_path).retention.seconds == 31_536_000

    def test_outputs_skip_sidecars_and_dotfiles(self, tmp_path):
        out = tmp_path / "o.csv"
        out.write_text("x")
        write_sidecar(meta(tmp_path), out)
        Cache(tmp_path).change_retention_period("3 minutes")
        assert Cache(tmp_path).outputs() == [out]
        assert Cache(tmp_path).entries()[0][1].backend == "3DI"


def fake_runner(calls, create=(), returncode=0):
    def run(cmd):
        calls.append(cmd)
        for p in create:
            p.write_text("result")
        return types.SimpleNamespace(returncode=returncode, stdout="ok", stderr="boom\n")
    return run


class TestBackend:
    TEMPLATE = "{runtime} video_detect_landmarks {input} {output_dir}/rects.3DI"

    def test_dry_run_equals_sidecar_cmd(self, tmp_path):
        binds = {"input": "/d/v.mp4", "output_dir": str(tmp_path), "runtime": ""}
        outs = ["{output_dir}/rects.3DI"]
        dry = run_backend(self.TEMPLATE, binds, outs, dry_run=True)
        assert dry.dry_run and not dry.executed
        calls = []
        real = run_backend(self.TEMPLATE, binds, outs, backend="3DI",
                           runner=fake_runner(calls, [tmp_path / "rects.3DI"]))
        assert calls == [dry.cmd]
        assert read_sidecar(real.outputs[0]).cmd.encode() == dry.cmd.encode()

    def test_fresh_outputs_not_rerun(self, tmp_path):
        src = tmp_path / "v.mp4"
        src.write_bytes(b"video")
        binds = {"input": str(src), "output_dir": str(tmp_path)}
        outs = [tmp_path / "rects.3DI"]
        calls = []
        run = fake_runner(calls, outs)
        run_backend(self.TEMPLATE, binds, outs, runner=run, now=T0)
        rec = run_backend(self.TEMPLATE, binds, outs, runner=run, now=T0 + dt.timedelta(days=1))
        assert rec.reused and len(calls) == 1
        run_backend(self.TEMPLATE, binds, outs, runner=run, now=T0 + dt.timedelta(days=200))
        assert len(calls) == 2
        src.write_bytes(b"edited")
        run_backend(self.TEMPLATE, binds, outs, runner=run, now=T0 + dt.timedelta(days=200))
        assert len(calls) == 3
        run_backend(self.TEMPLATE, binds, outs, runner=run, force=True)
        assert len(calls) == 4

    def test_unbound_placeholder(self, tmp_path):
        calls = []
        with pytest.raises(ConfigurationError, match="config"):
            run_backend("tool --cfg {config} {input}", {"input": "x"}, [], runner=fake_runner(calls))
        assert calls == []

    def test_failure_carries_diagnostics(self, tmp_path):
        with pytest.raises(BackendError) as exc:
            run_backend("false", {}, [], runner=fake_runner([], returncode=3))
        assert exc.value.returncode == 3 and "boom" in exc.value.stderr

    def test_missing_declared_output(self, tmp_path):
        with pytest.raises(BackendError, match="declared outputs"):
            run_backend("true", {}, [tmp_path / "never"], runner=fake_runner([]))

    def test_quoting_and_runtime_env(self, monkeypatch):
        monkeypatch.setenv("BEHAVIOMETRY_RUNTIME", "docker run --rm img")
        cmd = materialize_command("{runtime} tool {input}", {"input": "/d/my video.mp4"})
        assert cmd == "docker run --rm img tool '/d/my video.mp4'"
        monkeypatch.delenv("BEHAVIOMETRY_RUNTIME")
        assert materialize_command("{runtime} tool {input}", {"input": "/x"}) == "tool /x"

    def test_real_subprocess(self, tmp_path):
        out = tmp_path / "copy.txt"
        src = tmp_path / "src.txt"
        src.write_text("payload")
        rec = run_backend("cp {input} {output_dir}/copy.txt",
                          {"input": str(src), "output_dir": str(tmp_path)}, [out])
        assert rec.executed and out.read_text() == "payload"
        assert read_sidecar(out).input_hash == hash_input(src)

    def test_pipeline(self, tmp_path):
        cfg_path = tmp_path / "t.json"
        cfg_path.write_text(json.dumps({
            "runtime": "",
            "templates": {
                "detect": {"cmd": "{runtime} echo a > {output_dir}/a.txt",
                           "outputs": ["{output_dir}/a.txt"]},
                "fit": {"cmd": "{runtime} cat {output_dir}/a.txt > {output_dir}/b.txt",
                        "outputs": ["{output_dir}/b.txt"], "metadata": {"camera": 30}},
            },
            "pipelines": {"all": ["detect", "fit"]},
        }))
        cfg = load_templates(cfg_path)
        recs = run_pipeline(cfg, cfg["pipelines"]["all"], {"output_dir": str(tmp_path)})
        assert [r.executed for r in recs] == [True, True]
        assert read_sidecar(tmp_path / "b.txt").extra == {"camera": 30}

    def test_bad_config(self, tmp_path):
        p = tmp_path / "t.json"
        p.write_text(json.dumps({"templates": {"a": {"cmd": "x"}}, "pipelines": {"p": ["zz"]}}))
        with pytest.raises(ConfigurationError):
            load_templates(p)


class TestCitation:
    def cfg(self, local):
        return CitationConfig("3DI", toolkit_version="9.8.7", morphable_model="BFM-2009",
                              camera_fov_deg=30, landmark_template="ibug51",
                              used_local_coefficients=local)

    def test_local_block_conditional(self):
        assert "Facial Basis" not in citation_block(self.cfg(False))
        assert "Facial Basis" in citation_block(self.cfg(True))

    def test_version_in_first_sentence(self):
        first = citation_block(self.cfg(False)).split(". ")[0]
        assert first.endswith("version 9.8.7")

    @pytest.mark.parametrize("local", [False, True])
    def test_numbering(self, local):
        text = citation_block(self.cfg(local))
        refs = [line for line in text.splitlines() if line.startswith("[")]
        assert [r.split("]")[0] + "]" for r in refs] == [f"[{i}]" for i in range(1, len(refs) + 1)]
        assert len(refs) == (4 if local else 3)
        for i in range(1, len(refs) + 1):
            assert f"[{i}]" in text.split("\n\n")[0]

    def test_empty_backend(self):
        with pytest.raises(ValidationError):
            CitationConfig(" ")
