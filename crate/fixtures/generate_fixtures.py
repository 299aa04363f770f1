#!/usr/bin/env python3
# Licensed to the Apache Software Foundation (ASF) under one
# or more contributor license agreements.  See the NOTICE file
# distributed with this work for additional information
# regarding copyright ownership.  The ASF licenses this file
# to you under the Apache License, Version 2.0 (the
# "License"); you may not use this file except in compliance
# with the License.  You may obtain a copy of the License at
#
#   http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing,
# software distributed under the License is distributed on an
# "AS IS" BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
# KIND, either express or implied.  See the License for the
# specific language governing permissions and limitations
# under the License.
"""Regenerates the committed fixture tree.

Parquet files are written by pyarrow; each gets a ``<name>.json`` sidecar with
pyarrow's metadata view and its row dump in canonical form.  Iceberg tables are
created with pyiceberg, delete snapshots are appended with fastavro, and each
table gets an ``oracle.json`` holding pyiceberg's scan plan and table reads
(equality-delete tables use the brute-force reader below, cross-checked against
pyiceberg on every table pyiceberg can read).

Canonical row form: ints/bools/strings as JSON scalars, floats widened to
double, binary as {"$bytes": hex}, timestamps as epoch micros, dates as epoch
days, decimals as fixed-point strings, lists as arrays, structs as objects and
maps as arrays of {"key", "value"} objects.
"""

import datetime
import decimal
import json
import os
import random
import shutil
import sys

import fastavro
import pyarrow as pa
import pyarrow.compute as pc
import pyarrow.parquet as pq

HERE = os.path.dirname(os.path.abspath(__file__))
PARQUET_DIR = os.path.join(HERE, "parquet")
ICEBERG_DIR = os.path.join(HERE, "iceberg")
# Object-store prefix baked into committed Iceberg metadata; tests map it back
# onto the fixture directory through a fetch hook.
STORE_PREFIX = "s3://fixture-bucket/warehouse"
FILE_PATH_FIELD_ID = 2147483546

EPOCH = datetime.datetime(1970, 1, 1, tzinfo=datetime.timezone.utc)


def canon(value, typ):
    if value is None:
        return None
    if pa.types.is_list(typ) or pa.types.is_large_list(typ):
        return [canon(v, typ.value_type) for v in value]
    if pa.types.is_map(typ):
        return [{"key": canon(k, typ.key_type), "value": canon(v, typ.item_type)} for k, v in value]
    if pa.types.is_struct(typ):
        return {typ.field(i).name: canon(value[typ.field(i).name], typ.field(i).type) for i in range(typ.num_fields)}
    if pa.types.is_timestamp(typ):
        if value.tzinfo is None:
            value = value.replace(tzinfo=datetime.timezone.utc)
        delta = value - EPOCH
        return (delta.days * 86400 + delta.seconds) * 1_000_000 + delta.microseconds
    if pa.types.is_date(typ):
        return (value - datetime.date(1970, 1, 1)).days
    if pa.types.is_decimal(typ):
        return format(value, "f")
    if pa.types.is_binary(typ) or pa.types.is_fixed_size_binary(typ) or pa.types.is_large_binary(typ):
        return {"$bytes": value.hex()}
    if pa.types.is_floating(typ):
        return float(value)
    if pa.types.is_boolean(typ):
        return bool(value)
    if pa.types.is_integer(typ):
        return int(value)
    if pa.types.is_string(typ) or pa.types.is_large_string(typ):
        return str(value)
    raise TypeError(f"no canonical form for {typ}")


def canon_rows(table):
    fields = list(table.schema)
    out = []
    for row in table.to_pylist():
        out.append({f.name: canon(row[f.name], f.type) for f in fields})
    return out


def stat_value(v):
    if v is None:
        return None
    if isinstance(v, bytes):
        return {"$bytes": v.hex()}
    if isinstance(v, datetime.datetime):
        return canon(v, pa.timestamp("us"))
    if isinstance(v, datetime.date):
        return canon(v, pa.date32())
    if isinstance(v, decimal.Decimal):
        return format(v, "f")
    if isinstance(v, float):
        return float(v)
    return v


def metadata_dump(path):
    md = pq.ParquetFile(path).metadata
    leaves = []
    for j in range(md.num_columns):
        c = md.schema.column(j)
        leaves.append({
            "path": c.path,
            "physical_type": c.physical_type,
            "max_definition_level": c.max_definition_level,
            "max_repetition_level": c.max_repetition_level,
        })
    groups = []
    for i in range(md.num_row_groups):
        rg = md.row_group(i)
        cols = []
        for j in range(rg.num_columns):
            cc = rg.column(j)
            stats = None
            if cc.is_stats_set and cc.statistics.has_min_max:
                st = cc.statistics
                stats = {"min": stat_value(st.min), "max": stat_value(st.max), "null_count": st.null_count}
            cols.append({
                "path": cc.path_in_schema,
                "codec": cc.compression,
                "data_page_offset": cc.data_page_offset,
                "dictionary_page_offset": cc.dictionary_page_offset if cc.has_dictionary_page else None,
                "total_compressed_size": cc.total_compressed_size,
                "num_values": cc.num_values,
                "statistics": stats,
            })
        groups.append({"num_rows": rg.num_rows, "columns": cols})
    return {
        "num_rows": md.num_rows,
        "created_by": md.created_by,
        "top_level_columns": pq.ParquetFile(path).schema_arrow.names,
        "leaves": leaves,
        "row_groups": groups,
    }


def write_parquet_fixture(name, table, **kwargs):
    path = os.path.join(PARQUET_DIR, name + ".parquet")
    pq.write_table(table, path, **kwargs)
    back = pq.read_table(path)
    sidecar = {"file": name + ".parquet", "metadata": metadata_dump(path), "rows": canon_rows(back)}
    with open(os.path.join(PARQUET_DIR, name + ".json"), "w") as f:
        json.dump(sidecar, f, indent=None, separators=(",", ":"))
        f.write("\n")


def words(rng, n):
    vocab = ["alpha", "bravo", "charlie", "delta", "echo", "fox", "golf", "hotel", "india", "juliet"]
    return " ".join(rng.choice(vocab) for _ in range(n))


def parquet_fixtures():
    shutil.rmtree(PARQUET_DIR, ignore_errors=True)
    os.makedirs(PARQUET_DIR)
    rng = random.Random(7)

    n = 120
    flat = pa.table({
        "id": pa.array(range(n), pa.int64()),
        "i32": pa.array([rng.randint(-1000, 1000) for _ in range(n)], pa.int32()),
        "f64": pa.array([rng.uniform(-1e6, 1e6) for _ in range(n)], pa.float64()),
        "f32": pa.array([rng.uniform(-10, 10) for _ in range(n)], pa.float32()),
        "flag": pa.array([rng.random() < 0.5 for _ in range(n)], pa.bool_()),
        "name": pa.array([None if i % 7 == 3 else words(rng, rng.randint(1, 4)) for i in range(n)], pa.string()),
    }, schema=pa.schema([
        pa.field("id", pa.int64(), nullable=False),
        pa.field("i32", pa.int32()),
        pa.field("f64", pa.float64()),
        pa.field("f32", pa.float32()),
        pa.field("flag", pa.bool_()),
        pa.field("name", pa.string()),
    ]))
    write_parquet_fixture("flat_plain_uncompressed", flat, use_dictionary=False, compression="NONE", row_group_size=50)

    cats = ["web_search", "bash", "read_file", "edit", "none"]
    dict_tab = pa.table({
        "id": pa.array(range(300), pa.int64()),
        "tool": pa.array([cats[rng.randrange(len(cats))] for _ in range(300)], pa.string()),
        "score": pa.array([rng.randrange(10) for _ in range(300)], pa.int32()),
    })
    write_parquet_fixture("flat_dict_snappy", dict_tab, use_dictionary=True, compression="SNAPPY", row_group_size=100)
    write_parquet_fixture("flat_dict_gzip", dict_tab, use_dictionary=True, compression="GZIP", row_group_size=150)
    write_parquet_fixture("flat_plain_zstd", flat, use_dictionary=False, compression="ZSTD", row_group_size=60)

    # First row group is entirely null in `maybe`, and pages are tiny so the
    # later groups hold a mix of all-null and partially-null pages.
    maybe = [None] * 100 + [None if (i // 10) % 2 == 0 else i for i in range(100)]
    nulls = pa.table({
        "id": pa.array(range(200), pa.int64()),
        "maybe": pa.array(maybe, pa.int64()),
        "label": pa.array([None if i < 100 else f"v{i % 3}" for i in range(200)], pa.string()),
    })
    write_parquet_fixture("optional_nulls_pages", nulls, use_dictionary=["label"], compression="SNAPPY",
                          row_group_size=100, data_page_size=64, write_batch_size=10)

    lists = []
    for i in range(80):
        r = rng.random()
        if r < 0.1:
            lists.append(None)
        elif r < 0.2:
            lists.append([])
        else:
            lists.append([None if rng.random() < 0.1 else rng.randint(0, 99) for _ in range(rng.randint(1, 5))])
    list_tab = pa.table({"id": pa.array(range(80), pa.int32()), "xs": pa.array(lists, pa.list_(pa.int64()))})
    write_parquet_fixture("list_int_snappy", list_tab, compression="SNAPPY", row_group_size=40)

    st_type = pa.struct([
        ("a", pa.int32()),
        ("tags", pa.list_(pa.string())),
        ("inner", pa.struct([("x", pa.float64()), ("y", pa.string())])),
    ])
    structs = []
    for i in range(60):
        if i % 11 == 5:
            structs.append(None)
            continue
        structs.append({
            "a": None if i % 5 == 0 else i,
            "tags": None if i % 9 == 0 else [words(rng, 1) for _ in range(rng.randint(0, 3))],
            "inner": None if i % 13 == 0 else {"x": rng.random(), "y": None if i % 4 == 0 else words(rng, 2)},
        })
    struct_tab = pa.table({"id": pa.array(range(60), pa.int64()), "s": pa.array(structs, st_type)})
    write_parquet_fixture("struct_of_list_gzip", struct_tab, compression="GZIP", row_group_size=25)

    los_type = pa.list_(pa.struct([("k", pa.string()), ("v", pa.int64())]))
    los, maps = [], []
    for i in range(50):
        los.append(None if i % 10 == 0 else [{"k": words(rng, 1), "v": None if j == 1 else j * i} for j in range(i % 4)])
        maps.append(None if i % 7 == 0 else [(f"key{j}", None if (i + j) % 5 == 0 else i + j) for j in range(i % 3)])
    los_tab = pa.table({
        "id": pa.array(range(50), pa.int64()),
        "entries": pa.array(los, los_type),
        "attrs": pa.array(maps, pa.map_(pa.string(), pa.int64())),
    })
    write_parquet_fixture("list_of_struct_map_zstd", los_tab, compression="ZSTD", row_group_size=20)

    base_ts = datetime.datetime(2024, 3, 1, 12, 0, 0)
    logical = pa.table({
        "ts_ms": pa.array([base_ts + datetime.timedelta(milliseconds=1234 * i) for i in range(40)], pa.timestamp("ms")),
        "ts_us": pa.array([None if i % 6 == 0 else base_ts + datetime.timedelta(microseconds=987654 * i) for i in range(40)], pa.timestamp("us", tz="UTC")),
        "day": pa.array([datetime.date(2023, 12, 25) + datetime.timedelta(days=i * 3) for i in range(40)], pa.date32()),
        "dec32": pa.array([decimal.Decimal(f"{rng.randint(-99999, 99999)}").scaleb(-2) for _ in range(40)], pa.decimal128(7, 2)),
        "dec64": pa.array([decimal.Decimal(rng.randint(-10**15, 10**15)).scaleb(-4) for _ in range(40)], pa.decimal128(18, 4)),
        "dec_wide": pa.array([decimal.Decimal(rng.randint(-10**25, 10**25)).scaleb(-3) for _ in range(40)], pa.decimal128(30, 3)),
    })
    write_parquet_fixture("logical_types", logical, compression="SNAPPY", row_group_size=20,
                          store_decimal_as_integer=True, coerce_timestamps=None)

    binary = pa.table({
        "blob": pa.array([None if i % 5 == 2 else bytes(rng.randrange(256) for _ in range(rng.randint(0, 12))) for i in range(30)], pa.binary()),
        "fixed": pa.array([bytes(rng.randrange(256) for _ in range(4)) for _ in range(30)], pa.binary(4)),
    })
    write_parquet_fixture("binary_fixed_plain", binary, use_dictionary=False, compression="NONE")

    v2 = pa.table({
        "id": pa.array(range(150), pa.int64()),
        "maybe": pa.array([None if i % 3 == 0 else i * 1.5 for i in range(150)], pa.float64()),
        "tool": pa.array([None if i % 8 == 0 else cats[i % 5] for i in range(150)], pa.string()),
        "ok": pa.array([None if i % 10 == 0 else i % 3 == 0 for i in range(150)], pa.bool_()),
    })
    write_parquet_fixture("page_v2_snappy", v2, compression="SNAPPY", data_page_version="2.0", row_group_size=75,
                          data_page_size=256, write_batch_size=16)

    nested = []
    for i in range(45):
        if i % 9 == 4:
            nested.append(None)
        else:
            nested.append([None if rng.random() < 0.1 else [rng.randint(-5, 5) for _ in range(rng.randint(0, 3))]
                           for _ in range(rng.randint(0, 3))])
    nested_tab = pa.table({"id": pa.array(range(45), pa.int32()), "grid": pa.array(nested, pa.list_(pa.list_(pa.int32())))})
    write_parquet_fixture("nested_list_list_v2_zstd", nested_tab, compression="ZSTD", data_page_version="2.0", row_group_size=15)

    # Dictionary overflows mid-chunk so a chunk mixes dictionary and plain pages.
    multi = pa.table({
        "id": pa.array(range(2000), pa.int64()),
        "word": pa.array([f"w{rng.randrange(5000):05d}" for _ in range(2000)], pa.string()),
    })
    write_parquet_fixture("dict_fallback_multipage", multi, compression="SNAPPY", dictionary_pagesize_limit=512,
                          data_page_size=1024, row_group_size=1000)

    sorted_n = 1000
    stats_tab = pa.table({
        "x": pa.array([i + rng.randint(0, 20) for i in range(sorted_n)], pa.int64()),
        "s": pa.array([f"k{(i // 37):03d}" for i in range(sorted_n)], pa.string()),
        "d": pa.array([i / 10.0 + rng.random() for i in range(sorted_n)], pa.float64()),
        "maybe": pa.array([None if (i // 100) % 3 == 1 else rng.randint(0, 50) for i in range(sorted_n)], pa.int32()),
    })
    write_parquet_fixture("stats_multi_rowgroup", stats_tab, compression="SNAPPY", row_group_size=100)

    wide_cols = {f"c{j:04d}": pa.array([j * 10 + r for r in range(3)], pa.int32()) for j in range(2000)}
    write_parquet_fixture("wide_2000_columns", pa.table(wide_cols), compression="NONE")

    # Deliberately unsupported inputs; no oracle rows are asserted for these.
    unsup = pa.table({"x": pa.array(range(100), pa.int64())})
    pq.write_table(unsup, os.path.join(PARQUET_DIR, "unsupported_delta_binary_packed.parquet"),
                   use_dictionary=False, column_encoding={"x": "DELTA_BINARY_PACKED"})
    pq.write_table(unsup, os.path.join(PARQUET_DIR, "unsupported_lz4.parquet"), compression="LZ4")


# ---------------------------------------------------------------------------
# Iceberg


def manifest_list_records(path):
    with open(path, "rb") as f:
        reader = fastavro.reader(f)
        return reader.writer_schema, list(reader), reader.metadata


def data_manifest_schema(table):
    """Writer schema of an existing manifest, reused for hand-written delete manifests."""
    snap = table.current_snapshot()
    _, records, _ = manifest_list_records(local(snap.manifest_list))
    with open(local(records[0]["manifest_path"]), "rb") as f:
        reader = fastavro.reader(f)
        return reader.writer_schema, reader.metadata


def local(uri):
    return uri[len("file://"):] if uri.startswith("file://") else uri


def write_delete_file_parquet(path, table):
    pq.write_table(table, local(path))
    return os.path.getsize(local(path))


def append_delete_snapshot(tbl, deletes, extra_data=None):
    """Commit a snapshot adding delete files (and optional data files) by hand.

    `deletes` is a list of dicts {path, content (1|2), record_count, size, equality_ids}.
    `extra_data` is a list of dicts {path, record_count, size} added as DATA in the same commit,
    so they share the new sequence number.
    """
    meta_path = local(tbl.metadata_location)
    with open(meta_path) as f:
        meta = json.load(f)
    prev = tbl.current_snapshot()
    seq = meta["last-sequence-number"] + 1
    snap_id = max(s["snapshot-id"] for s in meta["snapshots"]) + 1000
    schema, avro_meta = data_manifest_schema(tbl)
    base = os.path.dirname(meta_path)
    spec_id = meta["default-spec-id"]

    def entry(path, content, count, size, eq_ids, bounds=None):
        lower = upper = None
        if bounds:
            lower = [{"key": FILE_PATH_FIELD_ID, "value": min(bounds).encode()}]
            upper = [{"key": FILE_PATH_FIELD_ID, "value": max(bounds).encode()}]
        return {
            "status": 1,
            "snapshot_id": snap_id,
            "sequence_number": None,
            "file_sequence_number": None,
            "data_file": {
                "content": content,
                "file_path": path,
                "file_format": "PARQUET",
                "partition": {},
                "record_count": count,
                "file_size_in_bytes": size,
                "column_sizes": None,
                "value_counts": None,
                "null_value_counts": None,
                "nan_value_counts": None,
                "lower_bounds": lower,
                "upper_bounds": upper,
                "key_metadata": None,
                "split_offsets": None,
                "equality_ids": eq_ids,
                "sort_order_id": None,
            },
        }

    def write_manifest(name, entries, content):
        mpath = os.path.join(base, name)
        meta_kv = {k: v for k, v in avro_meta.items() if not k.startswith("avro.")}
        meta_kv["content"] = "deletes" if content == 1 else "data"
        with open(mpath, "wb") as f:
            fastavro.writer(f, schema, entries, codec="deflate", metadata=meta_kv)
        return mpath, os.path.getsize(mpath)

    new_manifests = []
    if deletes:
        entries = [entry(d["path"], d["content"], d["record_count"], d["size"], d.get("equality_ids"), d.get("bounds")) for d in deletes]
        mpath, msize = write_manifest(f"deletes-{snap_id}.avro", entries, 1)
        new_manifests.append((mpath, msize, 1, len(entries), sum(d["record_count"] for d in deletes)))
    if extra_data:
        entries = [entry(d["path"], 0, d["record_count"], d["size"], None) for d in extra_data]
        mpath, msize = write_manifest(f"data-{snap_id}.avro", entries, 0)
        new_manifests.append((mpath, msize, 0, len(entries), sum(d["record_count"] for d in extra_data)))

    ml_schema, ml_records, ml_meta = manifest_list_records(local(prev.manifest_list))
    new_records = []
    for mpath, msize, content, nfiles, nrows in new_manifests:
        new_records.append({
            "manifest_path": "file://" + mpath,
            "manifest_length": msize,
            "partition_spec_id": spec_id,
            "content": content,
            "sequence_number": seq,
            "min_sequence_number": seq,
            "added_snapshot_id": snap_id,
            "added_files_count": nfiles,
            "existing_files_count": 0,
            "deleted_files_count": 0,
            "added_rows_count": nrows,
            "existing_rows_count": 0,
            "deleted_rows_count": 0,
            "partitions": [] if any(f["name"] == "partitions" for f in ml_schema["fields"]) else None,
            "key_metadata": None,
        })
    ml_path = os.path.join(base, f"snap-{snap_id}-manifest-list.avro")
    ml_kv = {k: v for k, v in ml_meta.items() if not k.startswith("avro.")}
    ml_kv["snapshot-id"] = str(snap_id)
    ml_kv["parent-snapshot-id"] = str(prev.snapshot_id)
    ml_kv["sequence-number"] = str(seq)
    with open(ml_path, "wb") as f:
        fastavro.writer(f, ml_schema, new_records + ml_records, codec="deflate", metadata=ml_kv)

    ts = max(s["timestamp-ms"] for s in meta["snapshots"]) + 1000
    meta["snapshots"].append({
        "snapshot-id": snap_id,
        "parent-snapshot-id": prev.snapshot_id,
        "sequence-number": seq,
        "timestamp-ms": ts,
        "manifest-list": "file://" + ml_path,
        "summary": {"operation": "delete" if not extra_data else "overwrite"},
        "schema-id": meta["current-schema-id"],
    })
    meta["last-sequence-number"] = seq
    meta["current-snapshot-id"] = snap_id
    meta["last-updated-ms"] = ts
    meta.setdefault("snapshot-log", []).append({"snapshot-id": snap_id, "timestamp-ms": ts})
    meta["refs"] = {"main": {"snapshot-id": snap_id, "type": "branch"}}
    version = len(meta["snapshots"]) + 10
    new_meta_path = os.path.join(base, f"{version:05d}-handwritten.metadata.json")
    with open(new_meta_path, "w") as f:
        json.dump(meta, f, indent=2)
    return new_meta_path, snap_id


def brute_force_read(meta_path, snapshot_id):
    """Independent reader: walk manifests with fastavro, apply Iceberg v2 delete rules directly."""
    with open(meta_path) as f:
        meta = json.load(f)
    snap = next(s for s in meta["snapshots"] if s["snapshot-id"] == snapshot_id)
    _, manifests, _ = manifest_list_records(local(snap["manifest-list"]))
    data, deletes = [], []
    for m in manifests:
        with open(local(m["manifest_path"]), "rb") as f:
            for e in fastavro.reader(f):
                if e["status"] == 2:
                    continue
                seq = e["sequence_number"]
                if seq is None:
                    seq = m["sequence_number"]
                df = e["data_file"]
                item = {"path": df["file_path"], "seq": seq, "content": df.get("content", 0), "eq": df.get("equality_ids"),
                        "bounds": file_path_bounds(df)}
                (data if item["content"] == 0 else deletes).append(item)
    schema = next(s for s in meta["schemas"] if s["schema-id"] == snap.get("schema-id", meta["current-schema-id"]))
    id_to_name = {f["id"]: f["name"] for f in schema["fields"]}
    rows = []
    plan = []
    for d in data:
        tbl = pq.ParquetFile(local(d["path"])).read()
        applicable = []
        for x in deletes:
            if x["content"] == 1 and x["seq"] >= d["seq"]:
                if x["bounds"] and not (x["bounds"][0] <= d["path"] <= x["bounds"][1]):
                    continue
                applicable.append(x)
            elif x["content"] == 2 and x["seq"] > d["seq"]:
                applicable.append(x)
        pos_deleted = set()
        eq_sets = []
        for x in applicable:
            dt = pq.ParquetFile(local(x["path"])).read()
            if x["content"] == 1:
                for r in dt.to_pylist():
                    if r["file_path"] == d["path"]:
                        pos_deleted.add(r["pos"])
            else:
                names = [id_to_name[i] for i in x["eq"]]
                eq_sets.append((names, {tuple(r[n] for n in names) for r in dt.to_pylist()}))
        plan.append({"data_file": d["path"], "deletes": sorted(x["path"] for x in applicable)})
        for pos, r in enumerate(tbl.to_pylist()):
            if pos in pos_deleted:
                continue
            # Null-safe: Python None == None, matching Iceberg equality-delete semantics.
            if any(tuple(r[n] for n in names) in keys for names, keys in eq_sets):
                continue
            rows.append({f.name: canon(r[f.name], f.type) for f in tbl.schema})
    return rows, plan


def file_path_bounds(df):
    lo = {kv["key"]: kv["value"] for kv in (df.get("lower_bounds") or [])}.get(FILE_PATH_FIELD_ID)
    hi = {kv["key"]: kv["value"] for kv in (df.get("upper_bounds") or [])}.get(FILE_PATH_FIELD_ID)
    if lo is None or hi is None:
        return None
    return lo.decode(), hi.decode()


def sort_rows(rows):
    return sorted(rows, key=lambda r: json.dumps(r, sort_keys=True))


def pyiceberg_read(tbl, snapshot_id):
    scan = tbl.scan(snapshot_id=snapshot_id)
    arrow = scan.to_arrow()
    plan = [{"data_file": t.file.file_path, "deletes": sorted(d.file_path for d in t.delete_files)} for t in scan.plan_files()]
    return canon_rows(arrow), plan


def iceberg_fixtures():
    from pyiceberg.catalog.sql import SqlCatalog
    from pyiceberg.partitioning import PartitionField, PartitionSpec
    from pyiceberg.schema import Schema
    from pyiceberg.transforms import IdentityTransform
    from pyiceberg.types import LongType, NestedField, StringType, DoubleType

    shutil.rmtree(ICEBERG_DIR, ignore_errors=True)
    os.makedirs(ICEBERG_DIR)
    catalog_db = os.path.join("/tmp", "lakecell-fixture-catalog.db")
    if os.path.exists(catalog_db):
        os.remove(catalog_db)
    catalog = SqlCatalog("fixtures", uri=f"sqlite:///{catalog_db}", warehouse="file://" + ICEBERG_DIR)
    catalog.create_namespace("db")

    schema = Schema(
        NestedField(1, "id", LongType(), required=False),
        NestedField(2, "category", StringType(), required=False),
        NestedField(3, "amount", DoubleType(), required=False),
    )
    arrow_schema = pa.schema([("id", pa.int64()), ("category", pa.string()), ("amount", pa.float64())])

    def batch(ids, cats):
        return pa.table({
            "id": pa.array(ids, pa.int64()),
            "category": pa.array(cats, pa.string()),
            "amount": pa.array([i * 1.25 for i in ids], pa.float64()),
        }, schema=arrow_schema)

    tables = {}

    # plain: two appends, partitioned by identity(category); snapshot 1 is historical.
    spec = PartitionSpec(PartitionField(source_id=2, field_id=1000, transform=IdentityTransform(), name="category"))
    t = catalog.create_table("db.plain", schema=schema, partition_spec=spec)
    t.append(batch([1, 2, 3, 4], ["a", "a", "b", "b"]))
    t.append(batch([5, 6, 7], ["a", "c", "c"]))
    t = catalog.load_table("db.plain")
    tables["plain"] = (t, t.metadata_location, [s.snapshot_id for s in t.metadata.snapshots], True)

    # position deletes: data file A and B, then a delete snapshot removing rows 0 and 2 of A.
    t = catalog.create_table("db.posdel", schema=schema)
    t.append(batch([10, 11, 12], ["x", "y", "z"]))
    t.append(batch([20, 21], ["x", "y"]))
    t = catalog.load_table("db.posdel")
    files = [task.file.file_path for task in t.scan().plan_files()]
    file_a = next(f for f in files if pq.ParquetFile(local(f)).read().column("id")[0].as_py() == 10)
    dpath = os.path.join(os.path.dirname(local(t.metadata_location)), "..", "data", "posdel-00001.parquet")
    dpath = os.path.normpath(dpath)
    pos_tab = pa.table({"file_path": pa.array([file_a, file_a], pa.string()), "pos": pa.array([0, 2], pa.int64())})
    size = write_delete_file_parquet(dpath, pos_tab)
    meta_path, _ = append_delete_snapshot(
        t, [{"path": "file://" + dpath, "content": 1, "record_count": 2, "size": size, "bounds": [file_a]}])
    t = catalog.load_table("db.posdel")
    t = StaticTable_from(meta_path)
    tables["posdel"] = (t, meta_path, [s.snapshot_id for s in t.metadata.snapshots], True)

    # equality deletes: A (seq 1); then one commit adds an eq-delete on category='q' together with
    # data file C that also contains category='q'. The delete applies to A but not to C.
    t = catalog.create_table("db.eqdel", schema=schema)
    t.append(batch([30, 31, 32, 33], ["q", "r", "q", None]))
    t = catalog.load_table("db.eqdel")
    base = os.path.normpath(os.path.join(os.path.dirname(local(t.metadata_location)), "..", "data"))
    eq_path = os.path.join(base, "eqdel-00001.parquet")
    eq_size = write_delete_file_parquet(eq_path, pa.table({"category": pa.array(["q"], pa.string())}))
    c_path = os.path.join(base, "data-c.parquet")
    c_size = write_delete_file_parquet(c_path, batch([40, 41], ["q", "s"]))
    meta_path, _ = append_delete_snapshot(
        t,
        [{"path": "file://" + eq_path, "content": 2, "record_count": 1, "size": eq_size, "equality_ids": [2]}],
        extra_data=[{"path": "file://" + c_path, "record_count": 2, "size": c_size}],
    )
    t = StaticTable_from(meta_path)
    tables["eqdel"] = (t, meta_path, [s.snapshot_id for s in t.metadata.snapshots], False)

    # mixed: position + equality (with null key, null-safe) deletes over two data files, plus a
    # position delete committed alongside its own data file (equal sequence numbers, applies).
    t = catalog.create_table("db.mixed", schema=schema)
    t.append(batch([50, 51, 52, 53, 54], ["m", None, "n", "m", None]))
    t.append(batch([60, 61, 62], ["n", "o", None]))
    t = catalog.load_table("db.mixed")
    files = [task.file.file_path for task in t.scan().plan_files()]
    file_50 = next(f for f in files if pq.ParquetFile(local(f)).read().column("id")[0].as_py() == 50)
    base = os.path.normpath(os.path.join(os.path.dirname(local(t.metadata_location)), "..", "data"))
    d_path = os.path.join(base, "data-d.parquet")
    d_size = write_delete_file_parquet(d_path, batch([70, 71, 72], ["p", "p", "n"]))
    pos_path = os.path.join(base, "posdel-mixed.parquet")
    pos_size = write_delete_file_parquet(pos_path, pa.table({
        "file_path": pa.array([file_50, "file://" + d_path], pa.string()),
        "pos": pa.array([3, 1], pa.int64()),
    }))
    eq_path = os.path.join(base, "eqdel-mixed.parquet")
    eq_size = write_delete_file_parquet(eq_path, pa.table({"category": pa.array([None, "n"], pa.string())}))
    meta_path, _ = append_delete_snapshot(
        t,
        [
            {"path": "file://" + pos_path, "content": 1, "record_count": 2, "size": pos_size,
             "bounds": [file_50, "file://" + d_path]},
            {"path": "file://" + eq_path, "content": 2, "record_count": 2, "size": eq_size, "equality_ids": [2]},
        ],
        extra_data=[{"path": "file://" + d_path, "record_count": 3, "size": d_size}],
    )
    t = StaticTable_from(meta_path)
    tables["mixed"] = (t, meta_path, [s.snapshot_id for s in t.metadata.snapshots], False)

    # empty table: metadata with no current snapshot.
    t = catalog.create_table("db.empty", schema=schema)
    tables["empty"] = (t, t.metadata_location, [], True)

    index = {}
    for name, (tbl, meta_path, snapshot_ids, pyiceberg_ok) in tables.items():
        meta_path = local(meta_path)
        with open(meta_path) as f:
            meta = json.load(f)
        oracle = {
            "current_snapshot_id": meta.get("current-snapshot-id"),
            "snapshots": [],
        }
        for sid in snapshot_ids:
            rows, plan = brute_force_read(meta_path, sid)
            if pyiceberg_ok:
                ref_rows, ref_plan = pyiceberg_read(tbl, sid)
                assert sort_rows(ref_rows) == sort_rows(rows), f"{name}@{sid}: brute force disagrees with pyiceberg"
                assert sorted(ref_plan, key=lambda p: p["data_file"]) == sorted(plan, key=lambda p: p["data_file"]), \
                    f"{name}@{sid}: plan disagrees with pyiceberg"
                source = "pyiceberg"
            else:
                source = "brute-force"
            oracle["snapshots"].append({
                "snapshot_id": sid,
                "oracle": source,
                "plan": sorted(plan, key=lambda p: p["data_file"]),
                "rows": sort_rows(rows),
            })
        table_dir = os.path.dirname(os.path.dirname(meta_path))
        index[name] = {"metadata": os.path.relpath(meta_path, table_dir), "dir": os.path.relpath(table_dir, ICEBERG_DIR)}
        with open(os.path.join(table_dir, "oracle.json"), "w") as f:
            json.dump(relocate_obj(oracle), f, indent=1)

    relocate_tree()
    with open(os.path.join(ICEBERG_DIR, "index.json"), "w") as f:
        json.dump({"store_prefix": STORE_PREFIX, "tables": index}, f, indent=1)


def StaticTable_from(meta_path):
    from pyiceberg.table import StaticTable
    return StaticTable.from_metadata("file://" + local(meta_path))


def relocate_str(s):
    if isinstance(s, bytes):
        return relocate_str(s.decode()).encode() if s.startswith(b"file://") or s.startswith(ICEBERG_DIR.encode()) else s
    for prefix in ("file://" + ICEBERG_DIR, ICEBERG_DIR):
        if isinstance(s, str) and s.startswith(prefix):
            return STORE_PREFIX + s[len(prefix):]
    return s


def relocate_obj(obj):
    if isinstance(obj, dict):
        return {k: relocate_obj(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [relocate_obj(v) for v in obj]
    return relocate_str(obj)


def relocate_tree():
    """Rewrite every absolute local path inside metadata, manifests and position deletes."""
    for root, _, names in os.walk(ICEBERG_DIR):
        for name in names:
            path = os.path.join(root, name)
            if name.endswith(".metadata.json"):
                with open(path) as f:
                    meta = json.load(f)
                with open(path, "w") as f:
                    json.dump(relocate_obj(meta), f, indent=2)
            elif name.endswith(".avro"):
                with open(path, "rb") as f:
                    reader = fastavro.reader(f)
                    schema, records, meta = reader.writer_schema, list(reader), reader.metadata
                    codec = reader.codec
                kv = {k: v for k, v in meta.items() if not k.startswith("avro.")}
                with open(path, "wb") as f:
                    fastavro.writer(f, schema, relocate_obj(records), codec=codec, metadata=kv)
            elif name.endswith(".parquet"):
                tbl = pq.ParquetFile(path).read()
                if tbl.schema.names == ["file_path", "pos"]:
                    paths = [relocate_str(p) for p in tbl.column("file_path").to_pylist()]
                    pq.write_table(tbl.set_column(0, "file_path", pa.array(paths, pa.string())), path)


if __name__ == "__main__":
    what = sys.argv[1:] or ["parquet", "iceberg"]
    if "parquet" in what:
        parquet_fixtures()
    if "iceberg" in what:
        iceberg_fixtures()
