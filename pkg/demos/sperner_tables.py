"""Print Sperner family counts and the decoded/ancestor tables for three descriptions."""

from mdlab.sperner import DecoderSet, ancestor_codebooks, decoded_at, enumerate_sperner


def main() -> None:
    for count in (2, 3, 4):
        print(f"l={count}: {len(enumerate_sperner(count))} families")
    for members in ([1], [2, 3]):
        decoder = DecoderSet.of(members, 3)
        print(f"decoded at {decoder.label()}:")
        for family in decoded_at(decoder):
            print("   ", family.label())
    print("ancestors of {2,3}:")
    for family in ancestor_codebooks(DecoderSet.of([2, 3], 3)):
        print("   ", family.label())


if __name__ == "__main__":
    main()
