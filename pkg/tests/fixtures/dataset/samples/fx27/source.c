int pick_channel(int ch)
{
    int levels[4];
    levels[0] = 10;
    levels[1] = 20;
    levels[2] = 30;
    levels[3] = 40;
    if (ch > 4)
        return 0;
    return levels[ch];
}
