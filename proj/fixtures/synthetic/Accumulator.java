// Synthetic optimization landscape for the engine-mode comparison. Scripted
// edits move the writable region between quality levels; the EVAL markers
// drive the offline marker-stage evaluators.
public class Accumulator {
    // EVOLVE-BLOCK-START
    public long fold(long[] values) {
        long acc = 0;
        for (int i = 0; i < values.length; i++) {
            acc += weigh(values[i]);
        }
        return acc;
    }
    // LEVEL0
    // EVAL:tests=4/4
    // EVAL:perf=0.75
    // EVAL:static=0.90
    // EVAL:judge=0.60
    // EVOLVE-BLOCK-END

    private long weigh(long value) {
        return value * 3 + 1;
    }
}
