package bitset;

import java.util.BitSet;

public class ImmutableBitSet {

    private final BitSet bitSet;

    public ImmutableBitSet(BitSet bitSet) {
        this.bitSet = (BitSet) bitSet.clone();
    }

    public int length() {
        return this.bitSet.length();
    }

    public int cardinality() {
        return this.bitSet.cardinality();
    }
}
